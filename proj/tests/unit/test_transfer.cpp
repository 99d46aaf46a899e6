#include "support/oracles.hpp"
#include "xferlos/transfer/transfer.hpp"

#include <gtest/gtest.h>

using namespace xferlos;

namespace {

std::vector<std::string> inputs(const std::string& prefix, int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

LstmModel trained_like(const FeatureSpace& fs, std::uint64_t seed, int h = 4) {
  Rng rng(seed);
  Hyperparameters hp;
  hp.hidden_units = h;
  hp.learning_rate = 1e-3;
  hp.dropout_rate = 0.1;
  hp.batch_size = 512;
  LstmModel m = LstmModel::initialize(fs, hp, rng);
  // Perturb every block so copies are distinguishable from a cold start.
  for (auto* p : m.network.parameters()) *p += glorot_init(p->rows(), p->cols(), rng);
  return m;
}

}  // namespace

TEST(Alignment, IdenticalSpacesAreTotalTransfer) {
  FeatureSpace s = FeatureSpace::augmented(inputs("v", 5));
  TransferPlan p = compute_feature_alignment(s, s);
  EXPECT_EQ(p.n_coinciding(), 11u);
  EXPECT_EQ(p.n_non_coinciding(), 0u);
  EXPECT_EQ(p.relation, SpaceRelation::T_subset_or_equal_S);
}

TEST(Alignment, RelationTags) {
  FeatureSpace src({"a", "b", "c"});
  EXPECT_EQ(compute_feature_alignment(src, FeatureSpace({"a", "b", "c", "d"})).relation,
            SpaceRelation::subset_S_of_T);
  EXPECT_EQ(compute_feature_alignment(src, FeatureSpace({"a", "d"})).relation, SpaceRelation::partial_overlap);
  EXPECT_EQ(compute_feature_alignment(src, FeatureSpace({"c", "a"})).relation, SpaceRelation::T_subset_or_equal_S);
}

TEST(Alignment, ReplicatesReportedOverlapCounts) {
  // Source has 25 inputs; targets reuse some of them and add their own.
  const auto src_inputs = inputs("shared ", 25);
  FeatureSpace src = FeatureSpace::augmented(src_inputs, "med-surg");
  auto first = [&](int k) { return std::vector<std::string>(src_inputs.begin(), src_inputs.begin() + k); };
  struct Case {
    std::vector<std::string> in;
    std::size_t coinc, noncoinc;
  };
  const std::vector<Case> cases{
      {concat(first(25), inputs("ccu ", 2)), 51, 4},
      {concat(first(23), inputs("micu ", 1)), 47, 2},
      {concat(first(25), inputs("cticu ", 8)), 51, 16},
      {concat(first(24), inputs("csicu ", 11)), 49, 22},
  };
  for (const auto& c : cases) {
    TransferPlan p = compute_feature_alignment(src, FeatureSpace::augmented(c.in));
    EXPECT_EQ(p.n_coinciding(), c.coinc);
    EXPECT_EQ(p.n_non_coinciding(), c.noncoinc);
  }
}

TEST(Alignment, DuplicateNamesRejected) {
  EXPECT_THROW(FeatureSpace({"a", "b", "a"}), ValidationError);
}

TEST(WeightTransfer, IdenticalSpacesCopyKernelBitForBit) {
  FeatureSpace s = FeatureSpace::augmented(inputs("v", 4));
  LstmModel src = trained_like(s, 1);
  Rng rng(2);
  LstmModel t = transfer_weights(src, s, rng);
  EXPECT_EQ(t.network.layers[0].kernel, src.network.layers[0].kernel);
}

TEST(WeightTransfer, RowsFollowNamesAndFreshRowsAreGlorot) {
  FeatureSpace src_space({"a", "b", "c"});
  FeatureSpace tgt_space({"b", "d", "a"});
  LstmModel src = trained_like(src_space, 3);
  Rng rng(10);
  LstmModel t = transfer_weights(src, tgt_space, rng);
  const Matrix& ks = src.network.layers[0].kernel;
  const Matrix& kt = t.network.layers[0].kernel;
  EXPECT_EQ(kt.row(0), ks.row(1));
  EXPECT_EQ(kt.row(2), ks.row(0));
  Rng replay(10);
  const Matrix fresh = glorot_init(3, ks.cols(), replay);
  EXPECT_EQ(kt.row(1), fresh.row(1));
}

TEST(WeightTransfer, RecurrentBiasAndHeadCopiedVerbatim) {
  FeatureSpace src_space = FeatureSpace::augmented(inputs("x", 6));
  FeatureSpace tgt_space = FeatureSpace::augmented(concat(inputs("x", 3), inputs("y", 4)));
  LstmModel src = trained_like(src_space, 4);
  Rng rng(1);
  LstmModel t = transfer_weights(src, tgt_space, rng, {64, false});
  EXPECT_EQ(t.network.layers[0].recurrent_kernel, src.network.layers[0].recurrent_kernel);
  EXPECT_EQ(t.network.layers[0].bias, src.network.layers[0].bias);
  EXPECT_EQ(t.network.dense.weight, src.network.dense.weight);
  EXPECT_EQ(t.network.dense.bias, src.network.dense.bias);
  EXPECT_EQ(t.hyper.batch_size, 64);
  EXPECT_EQ(t.hyper.learning_rate, src.hyper.learning_rate);
  EXPECT_EQ(t.hyper.dropout_rate, src.hyper.dropout_rate);
  EXPECT_EQ(t.hyper.hidden_units, src.hyper.hidden_units);
  EXPECT_EQ(t.features, tgt_space);
}

TEST(WeightTransfer, FreshHeadOption) {
  FeatureSpace s = FeatureSpace::augmented(inputs("x", 2));
  LstmModel src = trained_like(s, 4);
  Rng rng(1);
  LstmModel t = transfer_weights(src, s, rng, {32, true});
  EXPECT_NE(t.network.dense.weight, src.network.dense.weight);
  EXPECT_EQ(t.network.dense.bias(0, 0), 0.0);
}

TEST(WeightTransfer, IdempotentUnderSameSeed) {
  FeatureSpace a = FeatureSpace::augmented(inputs("x", 5));
  FeatureSpace b = FeatureSpace::augmented(concat(inputs("x", 2), inputs("z", 3)));
  LstmModel src = trained_like(a, 6);
  Rng r1(77), r2(77);
  LstmModel t1 = transfer_weights(src, b, r1), t2 = transfer_weights(src, b, r2);
  auto p1 = t1.network.parameters(), p2 = t2.network.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(*p1[i], *p2[i]);
}

TEST(WeightTransfer, PlanMismatchRejected) {
  FeatureSpace a({"a", "b"}), b({"b", "c"}), c({"c", "d", "e"});
  LstmModel src = trained_like(a, 1);
  Rng rng(1);
  TransferPlan wrong = compute_feature_alignment(a, c);
  EXPECT_THROW(transfer_weights(src, b, wrong, rng), ValidationError);
}

TEST(WeightTransfer, TargetPermutationOnlyPermutesRows) {
  const auto in = inputs("f", 4);
  FeatureSpace src_space = FeatureSpace::augmented(in);
  LstmModel src = trained_like(src_space, 8);
  std::vector<std::string> perm_names = src_space.names();
  std::reverse(perm_names.begin(), perm_names.end());
  FeatureSpace perm(perm_names);
  Rng r(3);
  LstmModel t = transfer_weights(src, perm, r);
  Rng data(4);
  Sequence x = oracle::random_batch(5, static_cast<long>(src_space.size()), data);
  Sequence xp = x;
  const long n = static_cast<long>(src_space.size());
  for (std::size_t s = 0; s < x.size(); ++s)
    for (long j = 0; j < n; ++j) xp[s].col(j) = x[s].col(n - 1 - j);
  // Same model up to summation order.
  EXPECT_LT((src.predict(x) - t.predict(xp)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FullTransfer, IdentityPassThrough) {
  FeatureSpace s = FeatureSpace::augmented(inputs("x", 3));
  LstmModel src = trained_like(s, 2);
  auto params = src.network.parameters();
  AdamState st = AdamState::zeros_like(params);
  st.first_moment[0].setConstant(0.25);
  st.step = 40;
  FullTransfer ft = full_model_transfer(src, st, s, 128);
  EXPECT_EQ(ft.model.network.layers[0].kernel, src.network.layers[0].kernel);
  EXPECT_EQ(ft.optimizer, st);
  EXPECT_EQ(ft.model.hyper.batch_size, 128);
}

TEST(FullTransfer, SelectsRowsAndMomentsInTargetOrder) {
  FeatureSpace src_space({"a", "b", "c", "d"});
  LstmModel src = trained_like(src_space, 5);
  auto params = src.network.parameters();
  AdamState st = AdamState::zeros_like(params);
  Rng rng(5);
  st.first_moment[0] = glorot_init(4, src.network.layers[0].kernel.cols(), rng);
  st.second_moment[0] = glorot_init(4, src.network.layers[0].kernel.cols(), rng).cwiseAbs();
  st.step = 12;
  FullTransfer ft = full_model_transfer(src, st, FeatureSpace({"c", "a"}), 32);
  const Matrix& k = src.network.layers[0].kernel;
  EXPECT_EQ(ft.model.network.layers[0].kernel.row(0), k.row(2));
  EXPECT_EQ(ft.model.network.layers[0].kernel.row(1), k.row(0));
  EXPECT_EQ(ft.optimizer.first_moment[0].row(0), st.first_moment[0].row(2));
  EXPECT_EQ(ft.optimizer.second_moment[0].row(1), st.second_moment[0].row(0));
  EXPECT_EQ(ft.optimizer.step, 12);
  EXPECT_EQ(ft.optimizer.first_moment[1], st.first_moment[1]);
}

TEST(FullTransfer, NonSubsetTargetListsBlockingFeatures) {
  const auto src_inputs = inputs("shared ", 25);
  FeatureSpace src_space = FeatureSpace::augmented(src_inputs);
  LstmModel src = trained_like(src_space, 5);
  FeatureSpace csicu = FeatureSpace::augmented(
      concat(std::vector<std::string>(src_inputs.begin(), src_inputs.begin() + 24), inputs("csicu ", 11)));
  try {
    full_model_transfer(src, {}, csicu, 64);
    FAIL() << "expected TransferPreconditionError";
  } catch (const TransferPreconditionError& e) {
    EXPECT_EQ(e.blocking_features().size(), 22u);
  }
}

TEST(LearningRates, AlphaOneDegenerates) {
  TransferPlan p = compute_feature_alignment(FeatureSpace({"a", "b"}), FeatureSpace({"a", "c"}));
  DiscriminativeGroups g = assign_learning_rates(p, 1e-3, 1.0);
  EXPECT_EQ(g.slow_lr, g.fast_lr);
}

TEST(LearningRates, TenfoldReductionForCoinciding) {
  TransferPlan p = compute_feature_alignment(FeatureSpace({"a", "b"}), FeatureSpace({"a", "c", "b"}));
  DiscriminativeGroups g = assign_learning_rates(p, 1e-3, 1e-1);
  EXPECT_NEAR(g.slow_lr, 1e-4, 1e-18);
  EXPECT_EQ(g.fast_lr, 1e-3);
  EXPECT_EQ(g.slow_rows, (std::vector<long>{0, 2}));
  EXPECT_EQ(g.fast_rows, (std::vector<long>{1}));
}

TEST(LearningRates, NoNonCoincidingMeansSingleGroup) {
  TransferPlan p = compute_feature_alignment(FeatureSpace({"a", "b"}), FeatureSpace({"b"}));
  DiscriminativeGroups g = assign_learning_rates(p, 1e-3, 0.1);
  auto groups = split_first_tensor_groups(5, g.slow_rows, g.fast_rows, g.slow_lr, g.fast_lr);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_NEAR(groups[0].learning_rate, 1e-4, 1e-18);
  EXPECT_THROW(assign_learning_rates(p, 1e-3, 0.0), ValidationError);
  EXPECT_THROW(assign_learning_rates(p, 0.0, 0.5), ValidationError);
}
