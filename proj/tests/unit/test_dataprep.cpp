#include "xferlos/dataprep/synth.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace xferlos;

namespace {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

EventTable random_table(Rng& rng, int stays, int features, double p_record) {
  EventTable t;
  t.domain = "rand";
  for (int s = 0; s < stays; ++s) {
    const std::string id = "s" + std::to_string(s);
    t.los_days[id] = 1.0 + 10.0 * uniform01(rng);
    for (int j = 0; j < features; ++j)
      for (int k = 0; k < 30; ++k)
        if (uniform01(rng) < p_record)
          t.records.push_back({id, uniform(rng, 0.0, 1439.99), "f" + std::to_string(j),
                               std::round(4.0 * normal01(rng))});
  }
  return t;
}

SynthConfig small_synth(double missing, double noise, int stays = 60) {
  SynthConfig c;
  c.seed = 9;
  c.measurement_noise = noise;
  for (int i = 0; i < 4; ++i) c.pool.push_back({"shared " + std::to_string(i), true, 10.0 * i, 1.0 + i, 0.6, 0.4, 0.01});
  c.pool.push_back({"private 0", false, 5.0, 2.0, 0.7, 0.3, 0.0});
  c.domains.push_back({"src", stays, {"shared 0", "shared 1", "shared 2", "shared 3"}, missing, 0.0, 1.0, 0.0, 0});
  c.domains.push_back({"tgt", stays, {"shared 0", "shared 2", "private 0"}, missing, 0.3, 0.6, 0.2, 2});
  return c;
}

}  // namespace

TEST(Resample, HourlyMeanAndMask) {
  EventTable t;
  t.domain = "d";
  t.los_days["a"] = 2.0;
  t.records = {{"a", 185.0, "HR", 5.0}, {"a", 230.0, "HR", 7.0}, {"a", 60.0, "hr", 1.0}};
  GridCollection g = resample_hourly(t);
  ASSERT_EQ(g.features, std::vector<std::string>{"hr"});
  EXPECT_DOUBLE_EQ(g.stays[0].values(3, 0), 6.0);
  EXPECT_FALSE(g.stays[0].mask(3, 0));
  EXPECT_TRUE(g.stays[0].mask(0, 0));
  // Half-open buckets: 60 min belongs to hour 1.
  EXPECT_FALSE(g.stays[0].mask(1, 0));
  EXPECT_TRUE(std::isnan(g.stays[0].values(5, 0)));
}

TEST(Resample, MatchesBruteForceBucketing) {
  Rng rng(31);
  EventTable t = random_table(rng, 15, 4, 0.3);
  GridCollection g = resample_hourly(t);
  for (const auto& stay : g.stays) {
    for (std::size_t j = 0; j < g.features.size(); ++j) {
      for (int h = 0; h < 24; ++h) {
        double sum = 0.0;
        int cnt = 0;
        for (const auto& r : t.records)
          if (r.stay_id == stay.stay_id && r.feature == g.features[j] && r.offset_min >= 60.0 * h &&
              r.offset_min < 60.0 * (h + 1)) {
            sum += r.value;
            ++cnt;
          }
        ASSERT_EQ(stay.mask(h, static_cast<long>(j)), cnt == 0);
        if (cnt > 0) ASSERT_DOUBLE_EQ(stay.values(h, static_cast<long>(j)), sum / cnt);
      }
    }
  }
}

TEST(Resample, RejectsOutOfWindowAndShortStays) {
  EventTable t;
  t.los_days["a"] = 2.0;
  t.records = {{"a", 1440.0, "x", 1.0}};
  EXPECT_THROW(resample_hourly(t), ValidationError);
  t.records = {{"a", 10.0, "x", 1.0}};
  t.los_days["a"] = 0.5;
  EXPECT_THROW(resample_hourly(t), ValidationError);
  t.los_days.clear();
  EXPECT_THROW(resample_hourly(t), ValidationError);
}

TEST(Retention, SingleRecordingDropped) {
  EventTable t;
  for (int s = 0; s < 10; ++s) {
    const std::string id = std::to_string(s);
    t.los_days[id] = 3.0;
    t.records.push_back({id, 30.0, "once", 1.0 * s});
    t.records.push_back({id, 30.0, "twice", 1.0});
    t.records.push_back({id, 90.0, "twice", 2.0});
  }
  GridCollection g = resample_hourly(t);
  EXPECT_EQ(retain_features(g), std::vector<std::string>{"twice"});
}

TEST(Retention, BoundaryThirtyPercentInclusive) {
  EventTable t;
  for (int s = 0; s < 10; ++s) {
    const std::string id = std::to_string(s);
    t.los_days[id] = 3.0;
    t.records.push_back({id, 30.0, "lab", 1.0});
    if (s < 3) t.records.push_back({id, 200.0, "lab", 2.0});
  }
  GridCollection g = resample_hourly(t);
  EXPECT_EQ(retain_features(g).size(), 1u);
  // Repeated identical values are not distinct.
  EventTable same = t;
  for (auto& r : same.records) r.value = 1.0;
  EXPECT_THROW(retain_features(resample_hourly(same)), ValidationError);
}

TEST(Retention, MatchesSetCardinalityOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    EventTable t = random_table(rng, 20, 6, 0.02 + 0.02 * trial);
    GridCollection g = resample_hourly(t);
    std::set<std::string> expected;
    for (const auto& f : g.features) {
      int ok = 0;
      for (const auto& [id, los] : t.los_days) {
        std::map<int, std::pair<double, int>> hours;
        for (const auto& r : t.records)
          if (r.stay_id == id && r.feature == f) {
            auto& h = hours[static_cast<int>(r.offset_min / 60.0)];
            h.first += r.value;
            h.second += 1;
          }
        std::set<double> distinct;
        for (const auto& [h, sc] : hours) distinct.insert(sc.first / sc.second);
        if (distinct.size() >= 2) ++ok;
      }
      if (ok * 10 >= 3 * static_cast<int>(t.los_days.size())) expected.insert(f);
    }
    if (expected.empty()) {
      EXPECT_THROW(retain_features(g), ValidationError);
    } else {
      auto kept = retain_features(g);
      EXPECT_EQ(std::set<std::string>(kept.begin(), kept.end()), expected);
    }
  }
}

TEST(Impute, ForwardThenBackwardFill) {
  Matrix v(4, 1);
  v << NAN, 4.0, NAN, NAN;
  Mask m(4, 1);
  m << true, false, true, true;
  Imputed r = impute_ffill_bfill(v, m);
  EXPECT_EQ(r.values.col(0), Vector::Constant(4, 4.0));
  Vector ind(4);
  ind << 1, 0, 1, 1;
  EXPECT_EQ(r.indicators.col(0), ind);
}

TEST(Impute, FullyObservedUnchanged) {
  Matrix v = Matrix::Random(24, 3);
  Mask m = Mask::Constant(24, 3, false);
  Imputed r = impute_ffill_bfill(v, m);
  EXPECT_EQ(r.values, v);
  EXPECT_EQ(r.indicators.sum(), 0.0);
}

TEST(Impute, MatchesTwoPassScalarOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix v(24, 3);
    Mask m(24, 3);
    for (long i = 0; i < v.size(); ++i) {
      m.data()[i] = uniform01(rng) < 0.6;
      v.data()[i] = m.data()[i] ? NAN : normal01(rng);
    }
    Imputed r = impute_ffill_bfill(v, m);
    for (long j = 0; j < 3; ++j) {
      std::vector<double> col(24);
      for (int t = 0; t < 24; ++t) col[t] = v(t, j);
      for (int t = 1; t < 24; ++t)
        if (std::isnan(col[t])) col[t] = col[t - 1];
      for (int t = 22; t >= 0; --t)
        if (std::isnan(col[t])) col[t] = col[t + 1];
      for (int t = 0; t < 24; ++t) {
        if (std::isnan(col[t])) {
          ASSERT_TRUE(std::isnan(r.values(t, j)));
        } else {
          ASSERT_EQ(r.values(t, j), col[t]);
        }
        ASSERT_EQ(r.indicators(t, j), m(t, j) ? 1.0 : 0.0);
      }
    }
  }
}

TEST(Augment, WidthLawAndNames) {
  for (int n : {25, 33}) {
    std::vector<std::string> in;
    for (int i = 0; i < n; ++i) in.push_back("f" + std::to_string(i));
    EXPECT_EQ(FeatureSpace::augmented(in).size(), static_cast<std::size_t>(2 * n + 1));
  }
  Imputed stay{Matrix::Constant(24, 2, 3.0), Matrix::Zero(24, 2)};
  ScalingStats s{{1.0, 3.0}, {2.0, 1.0}, 11.5, 1.0};
  Matrix a = augment(stay, s);
  ASSERT_EQ(a.cols(), 5);
  EXPECT_EQ(a(0, 0), 1.0);
  EXPECT_EQ(a(0, 1), 0.0);
  EXPECT_EQ(a.middleCols(2, 2).cwiseAbs().sum(), 0.0);
  EXPECT_EQ(a(23, 4), 11.5);
}

TEST(Augment, NeverObservedBecomesTrainingMean) {
  Imputed stay{Matrix::Constant(24, 1, NAN), Matrix::Ones(24, 1)};
  Matrix a = augment(stay, {{5.0}, {2.0}, 0.0, 1.0});
  EXPECT_EQ(a.col(0).cwiseAbs().sum(), 0.0);
  EXPECT_EQ(a.col(1).sum(), 24.0);
}

TEST(Split, SizesAndPartition) {
  SplitIndices s = split_indices(100, 3);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.val.size(), 15u);
  EXPECT_EQ(s.test.size(), 15u);
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const long m = 10 + static_cast<long>(uniform_index(rng, 500));
    SplitIndices x = split_indices(m, trial);
    std::set<long> all;
    for (auto* part : {&x.train, &x.val, &x.test}) all.insert(part->begin(), part->end());
    EXPECT_EQ(static_cast<long>(all.size()), m);
    EXPECT_EQ(x.train.size() + x.val.size() + x.test.size(), static_cast<std::size_t>(m));
    EXPECT_EQ(x.train.size(), static_cast<std::size_t>(std::floor(0.7 * m + 1e-9)));
  }
  EXPECT_EQ(split_indices(57, 4).train, split_indices(57, 4).train);
  EXPECT_THROW(split_indices(9, 1), ValidationError);
}

TEST(Split, ScalingUsesTrainingRowsOnly) {
  SynthConfig cfg = small_synth(0.3, 0.05);
  auto out = synth_generate(cfg);
  Cohort c = prepare_cohort(out[0].events);
  SplitDatasets d = split_dataset(c, 11);
  SplitIndices idx = split_indices(c.size(), 11);
  EXPECT_EQ(d.train.scaling, fit_scaling(c, idx.train));
  EXPECT_EQ(d.test.scaling, d.train.scaling);
  EXPECT_NE(fit_scaling(c, idx.test).mean, d.train.scaling.mean);
  // Scaled training values have zero mean per recorded-or-filled input column.
  const long n = static_cast<long>(c.inputs.size());
  for (long j = 0; j < n; ++j) {
    double sum = 0.0;
    for (const auto& xt : d.train.data.inputs) sum += xt.col(j).sum();
    EXPECT_NEAR(sum / (24.0 * d.train.size()), 0.0, 1e-9);
  }
}

TEST(Synth, NoiselessFullyObservedReconstructsTruth) {
  SynthConfig cfg = small_synth(0.0, 0.0);
  auto out = synth_generate(cfg);
  for (const auto& dom : out) {
    Cohort c = prepare_cohort(dom.events);
    ASSERT_EQ(c.size(), static_cast<long>(dom.truth.size()));
    for (std::size_t f = 0; f < dom.features.size(); ++f) {
      auto it = std::find(c.inputs.begin(), c.inputs.end(), dom.features[f]);
      ASSERT_NE(it, c.inputs.end());
      const long j = it - c.inputs.begin();
      for (long s = 0; s < c.size(); ++s) {
        const std::string& id = c.stay_ids[static_cast<std::size_t>(s)];
        const long k = std::stol(id.substr(id.rfind('-') + 1));
        for (int t = 0; t < 24; ++t) ASSERT_EQ(c.stays[s].values(t, j), dom.truth[k](t, static_cast<long>(f)));
        ASSERT_EQ(c.stays[s].indicators.col(j).sum(), 0.0);
      }
    }
  }
}

TEST(Synth, LosFloorAndSparseFeaturesDropped) {
  auto out = synth_generate(small_synth(0.3, 0.05));
  for (const auto& dom : out)
    for (const auto& [id, los] : dom.events.los_days) EXPECT_GE(los, 1.0);
  Cohort tgt = prepare_cohort(out[1].events);
  EXPECT_EQ(tgt.inputs.size(), 3u);
}

TEST(Synth, IndicatorDensityTracksMissingness) {
  auto out = synth_generate(small_synth(0.4, 0.05, 500));
  Cohort c = prepare_cohort(out[0].events);
  double sum = 0.0, cnt = 0.0;
  for (const auto& s : c.stays) {
    sum += s.indicators.sum();
    cnt += static_cast<double>(s.indicators.size());
  }
  EXPECT_NEAR(sum / cnt, 0.4, 0.05);
}

TEST(Synth, DeterministicAndValidated) {
  auto a = synth_generate(small_synth(0.3, 0.05));
  auto b = synth_generate(small_synth(0.3, 0.05));
  ASSERT_EQ(a[1].events.records.size(), b[1].events.records.size());
  EXPECT_EQ(a[1].events.records.back().value, b[1].events.records.back().value);
  SynthConfig bad = small_synth(0.3, 0.05);
  bad.domains[1].n_stays = 10;
  EXPECT_THROW(synth_generate(bad), ValidationError);
  bad = small_synth(0.3, 0.05);
  bad.domains[1].features = {"private 0"};
  EXPECT_THROW(synth_generate(bad), ValidationError);
}

TEST(Pipeline, IndicatorConsistencyAndDeterminism) {
  auto out = synth_generate(small_synth(0.5, 0.05));
  Cohort c1 = prepare_cohort(out[0].events), c2 = prepare_cohort(out[0].events);
  GridCollection g = resample_hourly(out[0].events);
  for (long s = 0; s < c1.size(); ++s) {
    ASSERT_EQ(c1.stays[s].values, c2.stays[s].values);
    for (std::size_t j = 0; j < c1.inputs.size(); ++j) {
      const long gj = std::find(g.features.begin(), g.features.end(), c1.inputs[j]) - g.features.begin();
      for (int t = 0; t < 24; ++t) {
        ASSERT_EQ(c1.stays[s].indicators(t, static_cast<long>(j)) == 0.0, !g.stays[s].mask(t, gj));
        if (!g.stays[s].mask(t, gj))
          ASSERT_EQ(c1.stays[s].values(t, static_cast<long>(j)), g.stays[s].values(t, gj));
      }
    }
  }
}
