#include "support/oracles.hpp"
#include "xferlos/training/trainer.hpp"

#include <gtest/gtest.h>

using namespace xferlos;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<long>(v.size()));
  long i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Noiseless dataset: target is a smooth positive function of the mean of feature 0 over time.
LabeledSequences linear_dynamics(long m, long n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledSequences d;
  d.targets.resize(m);
  std::vector<double> level(m), drift(m);
  for (long i = 0; i < m; ++i) {
    level[i] = normal01(rng);
    drift[i] = 0.05 * normal01(rng);
  }
  for (int t = 0; t < kTimesteps; ++t) {
    Matrix x(m, n);
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < n; ++j) x(i, j) = (j == 0 ? level[i] + drift[i] * t : 0.2 * (j % 3) * level[i]);
    d.inputs.push_back(std::move(x));
  }
  for (long i = 0; i < m; ++i) d.targets(i) = 1.0 + std::exp(0.6 * level[i] + 1.0);
  return d;
}

}  // namespace

TEST(Msle, ExactFitIsZero) { EXPECT_EQ(msle(vec({1, 2, 3}), vec({1, 2, 3})), 0.0); }

TEST(Msle, NaturalLogUnit) { EXPECT_NEAR(msle(vec({0.0}), vec({std::exp(1.0) - 1.0})), 1.0, 1e-15); }

TEST(Msle, MatchesScalarLoop) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const long m = 1 + static_cast<long>(uniform_index(rng, 50));
    Vector p(m), y(m);
    std::vector<double> ps(m), ys(m);
    for (long i = 0; i < m; ++i) {
      ps[i] = p(i) = 10.0 * uniform01(rng);
      ys[i] = y(i) = 1.0 + 10.0 * uniform01(rng);
    }
    EXPECT_NEAR(msle(p, y), oracle::scalar_msle(ps, ys), 1e-12);
  }
}

TEST(Msle, RejectsNegative) {
  EXPECT_THROW(msle(vec({-0.1}), vec({1.0})), ValidationError);
  EXPECT_THROW(msle(vec({0.1}), vec({-1.0})), ValidationError);
}

TEST(Adam, ZeroGradientLeavesParametersAndDecaysMoments) {
  Matrix p = Matrix::Constant(2, 2, 1.5);
  Matrix g = Matrix::Zero(2, 2);
  std::vector<Matrix*> ps{&p}, gs{&g};
  AdamState s = AdamState::zeros_like(ps);
  s.first_moment[0].setConstant(1.0);
  s.second_moment[0].setConstant(1.0);
  s.step = 3;
  const Matrix before = p;
  AdamState fresh;
  adam_step(ps, gs, fresh, 0.01);
  EXPECT_EQ(p, before);
  EXPECT_EQ(fresh.step, 1);
  Matrix q = before;
  std::vector<Matrix*> qs{&q};
  adam_step(qs, gs, s, 0.01);
  EXPECT_DOUBLE_EQ(s.first_moment[0](0, 0), 0.9);
  EXPECT_DOUBLE_EQ(s.second_moment[0](0, 0), 0.999);
  EXPECT_EQ(s.step, 4);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  Matrix p = Matrix::Zero(1, 3);
  Matrix g(1, 3);
  g << 0.5, -2.0, 10.0;
  std::vector<Matrix*> ps{&p}, gs{&g};
  AdamState s;
  const double lr = 0.01;
  Matrix prev = p;
  for (int i = 0; i < 2000; ++i) {
    prev = p;
    adam_step(ps, gs, s, lr);
  }
  const Matrix step = (prev - p).cwiseAbs();
  for (long j = 0; j < 3; ++j) EXPECT_NEAR(step(0, j), lr, 1e-6);
}

TEST(Adam, MatchesHandRolledScalarTrace) {
  // f(x) = (x - 3)^2, x0 = 0
  double x = 0.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-7;
  std::vector<double> ref;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * (x - 3.0);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
    ref.push_back(x);
  }
  Matrix p = Matrix::Zero(1, 1), g(1, 1);
  std::vector<Matrix*> ps{&p}, gs{&g};
  AdamState s;
  for (int t = 0; t < 10; ++t) {
    g(0, 0) = 2.0 * (p(0, 0) - 3.0);
    adam_step(ps, gs, s, lr);
    EXPECT_NEAR(p(0, 0), ref[t], 1e-12);
  }
}

TEST(MultiGroupAdam, EqualRatesBitIdenticalToSingleGroup) {
  Rng rng(3);
  Matrix a = glorot_init(6, 4, rng), b = glorot_init(3, 4, rng);
  Matrix a2 = a, b2 = b;
  std::vector<Matrix*> ps{&a, &b}, ps2{&a2, &b2};
  AdamState single;
  auto groups = split_first_tensor_groups(2, {0, 2, 5}, {1, 3, 4}, 0.01, 0.01);
  for (int step = 0; step < 15; ++step) {
    Matrix ga = glorot_init(6, 4, rng), gb = glorot_init(3, 4, rng);
    std::vector<Matrix*> gs{&ga, &gb};
    adam_step(ps, gs, single, 0.01);
    multi_group_adam_step(ps2, gs, groups);
  }
  EXPECT_EQ(a, a2);
  EXPECT_EQ(b, b2);
}

TEST(MultiGroupAdam, ZeroRateFreezesGroup) {
  Rng rng(4);
  Matrix a = glorot_init(5, 4, rng), b = glorot_init(2, 4, rng);
  const Matrix a0 = a;
  std::vector<Matrix*> ps{&a, &b};
  auto groups = split_first_tensor_groups(2, {0, 1}, {2, 3, 4}, 0.01, 0.0);
  for (int step = 0; step < 5; ++step) {
    Matrix ga = glorot_init(5, 4, rng), gb = glorot_init(2, 4, rng);
    std::vector<Matrix*> gs{&ga, &gb};
    multi_group_adam_step(ps, gs, groups);
  }
  for (long r : {2, 3, 4}) EXPECT_EQ(a.row(r), a0.row(r));
  for (long r : {0, 1}) EXPECT_NE(a.row(r), a0.row(r));
}

TEST(MultiGroupAdam, SplitMatchesTwoIndependentOptimizers) {
  Rng rng(5);
  Matrix k = glorot_init(4, 3, rng), r = glorot_init(2, 3, rng);
  // Side-by-side: rows {0,2} + r at alpha*lr, rows {1,3} at lr.
  Matrix k_slow(2, 3), k_fast(2, 3), r_ref = r;
  k_slow << k.row(0), k.row(2);
  k_fast << k.row(1), k.row(3);
  const double lr = 1e-2, alpha = 1e-1;
  AdamState s_slow, s_fast;
  std::vector<Matrix*> ps{&k, &r};
  auto groups = split_first_tensor_groups(2, {0, 2}, {1, 3}, alpha * lr, lr);
  for (int step = 0; step < 12; ++step) {
    Matrix gk = glorot_init(4, 3, rng), gr = glorot_init(2, 3, rng);
    std::vector<Matrix*> gs{&gk, &gr};
    multi_group_adam_step(ps, gs, groups);
    Matrix gk_slow(2, 3), gk_fast(2, 3);
    gk_slow << gk.row(0), gk.row(2);
    gk_fast << gk.row(1), gk.row(3);
    std::vector<Matrix*> sp{&k_slow, &r_ref}, sg{&gk_slow, &gr};
    adam_step(sp, sg, s_slow, alpha * lr);
    std::vector<Matrix*> fp{&k_fast}, fg{&gk_fast};
    adam_step(fp, fg, s_fast, lr);
  }
  EXPECT_EQ(k.row(0), k_slow.row(0));
  EXPECT_EQ(k.row(2), k_slow.row(1));
  EXPECT_EQ(k.row(1), k_fast.row(0));
  EXPECT_EQ(k.row(3), k_fast.row(1));
  EXPECT_EQ(r, r_ref);
}

TEST(MultiGroupAdam, OverlappingGroupsRejected) {
  Matrix a = Matrix::Zero(3, 2), g = Matrix::Zero(3, 2);
  std::vector<Matrix*> ps{&a}, gs{&g};
  std::vector<ParamGroup> groups(2);
  groups[0].slices.push_back({0, {0, 1}});
  groups[1].slices.push_back({0, {1, 2}});
  EXPECT_THROW(multi_group_adam_step(ps, gs, groups), ValidationError);
  groups[1].slices = {{0, {}}};
  EXPECT_THROW(multi_group_adam_step(ps, gs, groups), ValidationError);
}

TEST(EarlyStoppingRule, ForcedSequenceStopsAtSeven) {
  const std::vector<double> losses{1.0, 0.999, 0.9985, 0.998, 0.9975, 0.997, 0.9965, 0.996};
  EXPECT_EQ(simulate_early_stopping(losses, 6, 0.005), 7);
}

TEST(EarlyStoppingRule, GeometricDecayNeverStops) {
  std::vector<double> losses;
  double l = 1.0;
  for (int e = 0; e < 100; ++e, l *= 0.99) losses.push_back(l);
  EXPECT_EQ(simulate_early_stopping(losses, 6, 0.005), 100);
}

TEST(EarlyStoppingRule, PropertyMatchesDirectPredicate) {
  Rng rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> losses;
    double l = 1.0;
    const int n = 5 + static_cast<int>(uniform_index(rng, 40));
    for (int e = 0; e < n; ++e) {
      l *= 1.0 + uniform(rng, -0.02, 0.01);
      losses.push_back(l);
    }
    // Direct: stop at first e where the last 6 epochs all fail to beat min(prefix) * 0.995.
    int expected = n;
    for (int e = 6; e < n; ++e) {
      bool all_stale = true;
      for (int k = e - 5; k <= e; ++k) {
        double best = losses[0];
        for (int q = 1; q < k; ++q) best = std::min(best, losses[q]);
        if (losses[k] < best * 0.995) all_stale = false;
      }
      if (all_stale) {
        expected = e + 1;
        break;
      }
    }
    ASSERT_EQ(simulate_early_stopping(losses, 6, 0.005), expected) << "trial " << trial;
  }
}

class TrainLoop : public ::testing::Test {
 protected:
  LstmModel fresh(std::uint64_t seed, long n) {
    Rng rng(seed);
    Hyperparameters hp;
    hp.hidden_units = 8;
    hp.dropout_rate = 0.0;
    std::vector<std::string> names;
    for (long j = 0; j < n; ++j) names.push_back("f" + std::to_string(j));
    return LstmModel::initialize(FeatureSpace(names), hp, rng);
  }
};

TEST_F(TrainLoop, NoiselessDynamicsFitWithin200Epochs) {
  LabeledSequences tr = linear_dynamics(128, 3, 1), va = linear_dynamics(64, 3, 2);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 16;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  TrainResult r = train(fresh(1, 3), tr, va, cfg, 17);
  ASSERT_FALSE(r.report.train_loss.empty());
  EXPECT_LT(*std::min_element(r.report.train_loss.begin(), r.report.train_loss.end()),
            0.1 * r.report.train_loss.front());
}

TEST_F(TrainLoop, ReturnsBestValidationWeightsAndIsDeterministic) {
  LabeledSequences tr = linear_dynamics(64, 2, 3), va = linear_dynamics(32, 2, 4);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 25;
  TrainResult a = train(fresh(2, 2), tr, va, cfg, 5);
  TrainResult b = train(fresh(2, 2), tr, va, cfg, 5);
  EXPECT_TRUE(a.report.same_trajectory(b.report));
  const double min_val = *std::min_element(a.report.val_loss.begin(), a.report.val_loss.end());
  EXPECT_DOUBLE_EQ(msle(a.model.predict(va.inputs), va.targets), min_val);
  EXPECT_EQ(a.report.best_val_loss(), min_val);
  EXPECT_LE(a.report.epochs_to_converge, cfg.max_epochs);
}

TEST_F(TrainLoop, RejectsEmptySplits) {
  LabeledSequences tr = linear_dynamics(8, 2, 3), empty;
  empty.targets.resize(0);
  EXPECT_THROW(train(fresh(2, 2), tr, empty, {}, 1), ValidationError);
  EXPECT_THROW(train(fresh(2, 2), empty, tr, {}, 1), ValidationError);
}

TEST_F(TrainLoop, DiscriminativeModeWithZeroFastRateFreezesRows) {
  LabeledSequences tr = linear_dynamics(32, 3, 3), va = linear_dynamics(16, 3, 4);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 3;
  cfg.groups = DiscriminativeGroups{{0, 1}, {2}, 1e-3, 0.0};
  LstmModel m0 = fresh(4, 3);
  TrainResult r = train(m0, tr, va, cfg, 9);
  EXPECT_EQ(r.model.network.layers[0].kernel.row(2), m0.network.layers[0].kernel.row(2));
  EXPECT_NE(r.model.network.layers[0].kernel.row(0), m0.network.layers[0].kernel.row(0));
}
