#pragma once

// Curation of long-format ICU event tables into model-ready tensors:
// hourly mean resampling -> feature retention -> forward/backward fill with
// imputation indicators -> train-split standardization -> [values | indicators | hour].

#include "xferlos/core/dataset.hpp"
#include "xferlos/core/feature_space.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace xferlos {

struct EventRecord {
  std::string stay_id;
  double offset_min = 0.0;  // minutes since unit admission
  std::string feature;
  double value = 0.0;
};

/// Raw recordings of one domain plus the LoS target of every stay.
struct EventTable {
  std::string domain;
  std::vector<EventRecord> records;
  std::map<std::string, double> los_days;
};

/// One stay on the 24-hour grid. values(t, j) is NaN where mask(t, j) is set.
struct StayGrid {
  std::string stay_id;
  Matrix values;  // 24 x n
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask;  // true = nothing recorded
  double los_days = 1.0;
};

struct GridCollection {
  std::string domain;
  std::vector<std::string> features;  // canonical names, sorted
  std::vector<StayGrid> stays;        // sorted by stay id
};

inline constexpr double kMinutesPerWindow = 24.0 * 60.0;
inline constexpr double kMinLosDays = 1.0;

/// Cell (t, j) is the mean of feature j's values with offset in [60t, 60(t+1)).
inline GridCollection resample_hourly(const EventTable& events) {
  GridCollection out;
  out.domain = events.domain;
  std::set<std::string> feature_set;
  std::set<std::string> stay_set;
  for (const auto& r : events.records) {
    if (!(r.offset_min >= 0.0 && r.offset_min < kMinutesPerWindow))
      throw ValidationError("event offset " + std::to_string(r.offset_min) + " min for stay '" + r.stay_id +
                            "' is outside the first 24h window");
    if (!std::isfinite(r.value)) throw ValidationError("non-finite value for stay '" + r.stay_id + "'");
    feature_set.insert(canonical_feature_name(r.feature));
    stay_set.insert(r.stay_id);
  }
  for (const auto& [id, los] : events.los_days) stay_set.insert(id);
  out.features.assign(feature_set.begin(), feature_set.end());

  std::map<std::string, std::size_t> fidx, sidx;
  for (std::size_t j = 0; j < out.features.size(); ++j) fidx[out.features[j]] = j;
  const long n = static_cast<long>(out.features.size());
  std::vector<Matrix> sums;
  std::vector<Matrix> counts;
  for (const auto& id : stay_set) {
    auto los = events.los_days.find(id);
    if (los == events.los_days.end()) throw ValidationError("stay '" + id + "' has no LoS target");
    if (!(los->second >= kMinLosDays))
      throw ValidationError("stay '" + id + "' has LoS " + std::to_string(los->second) + " < 1 day");
    sidx[id] = out.stays.size();
    StayGrid g;
    g.stay_id = id;
    g.los_days = los->second;
    out.stays.push_back(std::move(g));
    sums.push_back(Matrix::Zero(kTimesteps, n));
    counts.push_back(Matrix::Zero(kTimesteps, n));
  }
  for (const auto& r : events.records) {
    const std::size_t s = sidx.at(r.stay_id);
    const long j = static_cast<long>(fidx.at(canonical_feature_name(r.feature)));
    const long t = static_cast<long>(std::floor(r.offset_min / 60.0));
    sums[s](t, j) += r.value;
    counts[s](t, j) += 1.0;
  }
  for (std::size_t s = 0; s < out.stays.size(); ++s) {
    auto& g = out.stays[s];
    g.mask = (counts[s].array() == 0.0);
    g.values = (sums[s].array() / counts[s].array()).matrix();
    for (long i = 0; i < g.values.size(); ++i)
      if (g.mask.data()[i]) g.values.data()[i] = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

struct RetentionRule {
  int min_unique = 2;
  double min_fraction = 0.30;
};

/// Number of distinct recorded hourly values of feature `j` in one stay.
inline int distinct_recorded_values(const StayGrid& g, long j) {
  std::set<double> vals;
  for (int t = 0; t < kTimesteps; ++t)
    if (!g.mask(t, j)) vals.insert(g.values(t, j));
  return static_cast<int>(vals.size());
}

/// Keeps features with >= min_unique distinct recordings in at least min_fraction of stays (inclusive).
inline std::vector<std::string> retain_features(const GridCollection& grids, const RetentionRule& rule = {}) {
  if (grids.stays.empty()) throw ValidationError("feature retention needs at least one stay");
  std::vector<std::string> kept;
  const double m = static_cast<double>(grids.stays.size());
  for (std::size_t j = 0; j < grids.features.size(); ++j) {
    long qualifying = 0;
    for (const auto& g : grids.stays)
      if (distinct_recorded_values(g, static_cast<long>(j)) >= rule.min_unique) ++qualifying;
    // Compare counts rather than fractions so the boundary is exact.
    if (static_cast<double>(qualifying) >= rule.min_fraction * m - 1e-9) kept.push_back(grids.features[j]);
  }
  if (kept.empty())
    throw ValidationError("no feature passes retention (>= " + std::to_string(rule.min_unique) +
                          " distinct values in >= " + std::to_string(rule.min_fraction * 100.0) +
                          "% of stays); relax the thresholds");
  return kept;
}

struct Imputed {
  Matrix values;      // NaN only in columns never observed in the stay
  Matrix indicators;  // 1 where imputed, 0 where recorded
};

/// Forward fill along time, then backward fill leading gaps.
inline Imputed impute_ffill_bfill(const Matrix& values, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic,
                                                                            Eigen::RowMajor>& mask) {
  check_dim("mask rows", values.rows(), mask.rows());
  check_dim("mask cols", values.cols(), mask.cols());
  Imputed out{values, mask.cast<double>().matrix()};
  const long T = values.rows();
  for (long j = 0; j < values.cols(); ++j) {
    double last = std::numeric_limits<double>::quiet_NaN();
    for (long t = 0; t < T; ++t) {
      if (!mask(t, j)) {
        last = values(t, j);
      } else {
        out.values(t, j) = last;
      }
    }
    double next = std::numeric_limits<double>::quiet_NaN();
    for (long t = T - 1; t >= 0; --t) {
      if (!std::isnan(out.values(t, j)) && !mask(t, j)) next = out.values(t, j);
      if (std::isnan(out.values(t, j))) out.values(t, j) = next;
    }
  }
  return out;
}

inline Imputed impute_ffill_bfill(const StayGrid& g) { return impute_ffill_bfill(g.values, g.mask); }

/// Retained inputs of one domain after imputation; unscaled.
struct Cohort {
  std::string domain;
  std::vector<std::string> inputs;
  std::vector<std::string> stay_ids;
  std::vector<Imputed> stays;  // 24 x n each
  Vector targets;              // LoS days

  long size() const { return static_cast<long>(stays.size()); }
  FeatureSpace feature_space() const { return FeatureSpace::augmented(inputs, domain); }
};

/// Restricts each grid to `inputs` (in that order) and imputes.
inline Cohort build_cohort(const GridCollection& grids, const std::vector<std::string>& inputs) {
  Cohort c;
  c.domain = grids.domain;
  c.inputs = inputs;
  std::vector<long> cols;
  for (const auto& f : inputs) {
    auto it = std::find(grids.features.begin(), grids.features.end(), canonical_feature_name(f));
    if (it == grids.features.end()) throw ValidationError("feature '" + f + "' not present in event table");
    cols.push_back(static_cast<long>(it - grids.features.begin()));
  }
  c.targets.resize(static_cast<long>(grids.stays.size()));
  for (std::size_t s = 0; s < grids.stays.size(); ++s) {
    const auto& g = grids.stays[s];
    Matrix v(kTimesteps, static_cast<long>(cols.size()));
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(kTimesteps, static_cast<long>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      v.col(static_cast<long>(k)) = g.values.col(cols[k]);
      m.col(static_cast<long>(k)) = g.mask.col(cols[k]);
    }
    c.stay_ids.push_back(g.stay_id);
    c.stays.push_back(impute_ffill_bfill(v, m));
    c.targets(static_cast<long>(s)) = g.los_days;
  }
  return c;
}

/// resample -> retain -> impute.
inline Cohort prepare_cohort(const EventTable& events, const RetentionRule& rule = {}) {
  GridCollection grids = resample_hourly(events);
  return build_cohort(grids, retain_features(grids, rule));
}

/// Per-input standardization fitted on the training split; hour is scaled the same way.
struct ScalingStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  double hour_mean = 0.0;
  double hour_stddev = 1.0;

  friend bool operator==(const ScalingStats&, const ScalingStats&) = default;
};

inline ScalingStats fit_scaling(const Cohort& c, const std::vector<long>& rows) {
  const std::size_t n = c.inputs.size();
  ScalingStats s;
  s.mean.assign(n, 0.0);
  s.stddev.assign(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    double sum = 0.0, sq = 0.0;
    long cnt = 0;
    for (long r : rows)
      for (int t = 0; t < kTimesteps; ++t) {
        const double v = c.stays[static_cast<std::size_t>(r)].values(t, static_cast<long>(j));
        if (std::isnan(v)) continue;
        sum += v;
        sq += v * v;
        ++cnt;
      }
    if (cnt > 0) {
      const double mu = sum / static_cast<double>(cnt);
      const double var = std::max(0.0, sq / static_cast<double>(cnt) - mu * mu);
      s.mean[j] = mu;
      s.stddev[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
  }
  // Every stay contributes each hour 0..23 once.
  s.hour_mean = (kTimesteps - 1) / 2.0;
  s.hour_stddev = std::sqrt((static_cast<double>(kTimesteps) * kTimesteps - 1.0) / 12.0);
  return s;
}

/// [scaled values | indicators | scaled hour]; never-observed values become 0 (the training mean).
inline Matrix augment(const Imputed& stay, const ScalingStats& s) {
  const long n = stay.values.cols();
  check_dim("indicator cols", n, stay.indicators.cols());
  check_dim("scaling stats", n, static_cast<long>(s.mean.size()));
  Matrix out(kTimesteps, 2 * n + 1);
  for (int t = 0; t < kTimesteps; ++t) {
    for (long j = 0; j < n; ++j) {
      const double v = stay.values(t, j);
      out(t, j) = std::isnan(v) ? 0.0 : (v - s.mean[j]) / s.stddev[j];
      out(t, n + j) = stay.indicators(t, j);
    }
    out(t, 2 * n) = (static_cast<double>(t) - s.hour_mean) / s.hour_stddev;
  }
  return out;
}

/// Model-ready tensors of one domain (or one split of it).
struct DomainDataset {
  std::string domain;
  FeatureSpace features;  // 2n + 1 names
  LabeledSequences data;
  ScalingStats scaling;
  std::vector<std::string> stay_ids;

  long size() const { return data.size(); }
};

inline DomainDataset materialize(const Cohort& c, const std::vector<long>& rows, const ScalingStats& s) {
  DomainDataset d;
  d.domain = c.domain;
  d.features = c.feature_space();
  d.scaling = s;
  const long m = static_cast<long>(rows.size());
  const long width = static_cast<long>(d.features.size());
  d.data.inputs.assign(kTimesteps, Matrix(m, width));
  d.data.targets.resize(m);
  for (long i = 0; i < m; ++i) {
    const auto r = static_cast<std::size_t>(rows[static_cast<std::size_t>(i)]);
    const Matrix a = augment(c.stays[r], s);
    for (int t = 0; t < kTimesteps; ++t) d.data.inputs[t].row(i) = a.row(t);
    d.data.targets(i) = c.targets(static_cast<long>(r));
    d.stay_ids.push_back(c.stay_ids[r]);
  }
  return d;
}

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
};

struct SplitIndices {
  std::vector<long> train, val, test;
};

/// Seeded stay-level partition with sizes floor(0.70 m), floor(0.15 m), remainder.
inline SplitIndices split_indices(long m, std::uint64_t seed, const SplitRatios& ratios = {}) {
  if (m < 10) throw ValidationError("splitting needs at least 10 stays, got " + std::to_string(m));
  std::vector<long> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0L);
  Rng rng = make_rng(seed, "split");
  shuffle(order, rng);
  const auto n_train = static_cast<long>(std::floor(ratios.train * static_cast<double>(m) + 1e-9));
  const auto n_val = static_cast<long>(std::floor(ratios.val * static_cast<double>(m) + 1e-9));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

struct SplitDatasets {
  DomainDataset train, val, test;
};

/// Split, then scale all three parts with statistics of the training part only.
inline SplitDatasets split_dataset(const Cohort& c, std::uint64_t seed, const SplitRatios& ratios = {}) {
  const SplitIndices idx = split_indices(c.size(), seed, ratios);
  const ScalingStats s = fit_scaling(c, idx.train);
  return {materialize(c, idx.train, s), materialize(c, idx.val, s), materialize(c, idx.test, s)};
}

}  // namespace xferlos
