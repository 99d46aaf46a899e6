#pragma once

// Expected-gradients attribution and global feature importance.

#include "xferlos/core/feature_space.hpp"
#include "xferlos/core/lstm.hpp"

#include <atomic>
#include <concepts>
#include <iostream>
#include <map>
#include <numeric>
#include <thread>

namespace xferlos {

/// A model with batched predictions and per-stay input gradients.
template <class M>
concept DifferentiableModel = requires(const M& m, const Sequence& x, Vector* p) {
  { m.predict(x) } -> std::convertible_to<Vector>;
  { m.input_gradient(x, p) } -> std::convertible_to<Sequence>;
};

/// Attributions per stay, each 24 x n (time by augmented feature).
struct AttributionTensor {
  std::vector<Matrix> stays;

  long size() const { return static_cast<long>(stays.size()); }
  long features() const { return stays.empty() ? 0 : stays.front().cols(); }
};

struct ExpectedGradientsOptions {
  int n_samples = 200;
  std::uint64_t seed = 0;
  int chunk = 256;    // interpolated inputs per gradient call
  int threads = 0;    // 0: thread_cap()
};

namespace detail {

inline Matrix stay_matrix(const Sequence& batch, long row) {
  Matrix s(kTimesteps, batch.front().cols());
  for (int t = 0; t < kTimesteps; ++t) s.row(t) = batch[t].row(row);
  return s;
}

template <DifferentiableModel M>
Matrix attribute_one(const M& model, const Matrix& x, const std::vector<Matrix>& background, int n_samples,
                     int chunk, Rng& rng) {
  const long n = x.cols();
  Matrix acc = Matrix::Zero(kTimesteps, n);
  // Background stays are visited in reshuffled passes, so every stay is used equally often.
  // Full pass p of P draws u from [p/P, (p+1)/P); a trailing partial pass draws u from [0, 1).
  std::vector<std::size_t> order(background.size());
  std::size_t pos = order.size();
  const int full_passes = n_samples / static_cast<int>(background.size());
  int pass = -1;
  for (int start = 0; start < n_samples; start += chunk) {
    const int len = std::min(chunk, n_samples - start);
    std::vector<Matrix> diff(static_cast<std::size_t>(len));
    Sequence path(kTimesteps, Matrix(len, n));
    for (int k = 0; k < len; ++k) {
      if (pos == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order, rng);
        pos = 0;
        ++pass;
      }
      const Matrix& ref = background[order[pos++]];
      const double u = pass < full_passes ? (pass + uniform01(rng)) / full_passes : uniform01(rng);
      diff[k] = x - ref;
      for (int t = 0; t < kTimesteps; ++t) path[t].row(k) = ref.row(t) + u * diff[k].row(t);
    }
    const Sequence grad = model.input_gradient(path, nullptr);
    for (int k = 0; k < len; ++k)
      for (int t = 0; t < kTimesteps; ++t) acc.row(t) += diff[k].row(t).cwiseProduct(grad[t].row(k));
  }
  return acc / static_cast<double>(n_samples);
}

}  // namespace detail

/// Monte Carlo expected gradients. Stay i draws (background stay, u) pairs from its own
/// stream make_rng(seed, "eg", i), so results do not depend on the thread schedule.
/// With fewer samples than background stays the draws are plain uniform samples.
template <DifferentiableModel M>
AttributionTensor expected_gradients(const M& model, const Sequence& inputs, const Sequence& background,
                                     const ExpectedGradientsOptions& opt = {}) {
  if (background.empty() || background.front().rows() == 0) throw ValidationError("background set is empty");
  if (inputs.empty()) throw ValidationError("no inputs to explain");
  check_dim("timesteps", kTimesteps, static_cast<long>(inputs.size()));
  check_dim("timesteps", kTimesteps, static_cast<long>(background.size()));
  check_dim("features", inputs.front().cols(), background.front().cols());
  if (opt.n_samples < 1) throw ValidationError("n_samples must be positive");
  if (opt.chunk < 1) throw ValidationError("chunk must be positive");

  std::vector<Matrix> refs;
  for (long b = 0; b < background.front().rows(); ++b) refs.push_back(detail::stay_matrix(background, b));
  const long m = inputs.front().rows();
  AttributionTensor out;
  out.stays.resize(static_cast<std::size_t>(m));

  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < m; i = next++) {
      Rng rng = make_rng(opt.seed, "eg", static_cast<std::uint64_t>(i));
      out.stays[i] = detail::attribute_one(model, detail::stay_matrix(inputs, i), refs, opt.n_samples, opt.chunk, rng);
    }
  };
  const int n_threads = static_cast<int>(std::min<long>(opt.threads > 0 ? opt.threads : thread_cap(), m));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& a : out.stays)
    if (!a.allFinite()) throw NumericError("non-finite attribution");
  return out;
}

/// Up to `size` stays drawn without replacement from the pool (default background set).
inline Sequence sample_background(const Sequence& pool, std::uint64_t seed, long size = 200) {
  const long m = pool.front().rows();
  std::vector<long> idx(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) idx[i] = i;
  Rng rng = make_rng(seed, "background");
  shuffle(idx, rng);
  idx.resize(static_cast<std::size_t>(std::min(m, size)));
  std::sort(idx.begin(), idx.end());
  return select_rows(pool, idx);
}

struct ImportanceEntry {
  std::string feature;
  double score = 0.0;
};

/// Features ordered by descending score; ties keep feature-space order.
struct ImportanceRanking {
  std::vector<ImportanceEntry> entries;

  std::vector<ImportanceEntry> top(std::size_t k = 25) const {
    return {entries.begin(), entries.begin() + static_cast<long>(std::min(k, entries.size()))};
  }
  /// 1-based rank of a feature.
  int rank_of(const std::string& feature) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].feature == feature) return static_cast<int>(i) + 1;
    throw ValidationError("feature '" + feature + "' is not ranked");
  }
};

/// Mean over time, then over stays, of |attribution| (or the signed value).
inline ImportanceRanking global_importance(const AttributionTensor& attr, const FeatureSpace& features,
                                           bool signed_scores = false) {
  const long n = static_cast<long>(features.size());
  RowVector score = RowVector::Zero(n);
  for (const auto& a : attr.stays) {
    check_dim("features", n, a.cols());
    check_dim("timesteps", kTimesteps, a.rows());
    if (signed_scores) score += a.colwise().mean();
    else score += a.cwiseAbs().colwise().mean();
  }
  if (attr.size() > 0) score /= static_cast<double>(attr.size());
  ImportanceRanking r;
  for (long j = 0; j < n; ++j) r.entries.push_back({features.name(static_cast<std::size_t>(j)), score(j)});
  std::stable_sort(r.entries.begin(), r.entries.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.score > b.score; });
  return r;
}

struct OverlapSummary {
  std::size_t k = 0;                     // after clamping
  double overlap = 0.0;                  // |top-k before ∩ top-k after| / k
  std::map<std::string, int> rank_delta;  // rank after - rank before
  std::string warning;
};

inline OverlapSummary importance_overlap(const ImportanceRanking& before, const ImportanceRanking& after,
                                         std::size_t k = 25) {
  std::vector<std::string> a, b;
  for (const auto& e : before.entries) a.push_back(e.feature);
  for (const auto& e : after.entries) b.push_back(e.feature);
  std::vector<std::string> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa != sb) throw ValidationError("rankings cover different feature sets");
  if (a.empty()) throw ValidationError("rankings are empty");
  OverlapSummary s;
  s.k = k;
  if (k > a.size() || k == 0) {
    s.k = a.size();
    s.warning = "k=" + std::to_string(k) + " clamped to " + std::to_string(a.size());
    std::cerr << "warning: " << s.warning << "\n";
  }
  std::vector<std::string> ta(a.begin(), a.begin() + static_cast<long>(s.k));
  std::vector<std::string> tb(b.begin(), b.begin() + static_cast<long>(s.k));
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  std::vector<std::string> common;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
  s.overlap = static_cast<double>(common.size()) / static_cast<double>(s.k);
  for (std::size_t i = 0; i < a.size(); ++i) s.rank_delta[a[i]] = after.rank_of(a[i]) - static_cast<int>(i + 1);
  return s;
}

}  // namespace xferlos
