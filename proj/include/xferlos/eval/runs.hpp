#pragma once

// Repeated-run protocol: run k of an experiment uses seed derive_seed(base, "run", k).

#include "xferlos/eval/metrics.hpp"
#include "xferlos/eval/stats.hpp"

#include <atomic>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

namespace xferlos {

/// Outcome of one run: test metrics plus convergence bookkeeping.
struct RunOutcome {
  MetricReport test;
  int epochs_to_converge = 0;
  int best_epoch = 0;
  bool stagnated = false;
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;
};

struct RunRecord {
  int index = 0;
  std::uint64_t seed = 0;
  std::optional<RunOutcome> outcome;  // empty when the run failed
  std::string error;
};

/// (p2.5, median, p97.5) of a sample.
struct PercentileCI {
  double lower = 0.0;
  double median = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
};

inline PercentileCI percentile_ci(const std::vector<double>& x) {
  return {percentile(x, 2.5), percentile(x, 50.0), percentile(x, 97.5)};
}

struct RunDistribution {
  std::string name;
  std::vector<RunRecord> runs;  // ordered by run index
  std::vector<std::string> warnings;

  std::vector<const RunOutcome*> succeeded() const {
    std::vector<const RunOutcome*> v;
    for (const auto& r : runs)
      if (r.outcome) v.push_back(&*r.outcome);
    return v;
  }
  int n_failed() const { return static_cast<int>(runs.size() - succeeded().size()); }
  int stagnation_count() const {
    int n = 0;
    for (const auto* o : succeeded()) n += o->stagnated ? 1 : 0;
    return n;
  }

  /// Values of a metric over successful runs: mae, mape, mse, epochs, best_epoch, wall, cpu.
  std::vector<double> values(const std::string& metric) const {
    std::vector<double> v;
    for (const auto* o : succeeded()) {
      if (metric == "mae") v.push_back(o->test.mae);
      else if (metric == "mape") v.push_back(o->test.mape);
      else if (metric == "mse") v.push_back(o->test.mse);
      else if (metric == "epochs") v.push_back(o->epochs_to_converge);
      else if (metric == "best_epoch") v.push_back(o->best_epoch);
      else if (metric == "wall") v.push_back(o->wall_seconds);
      else if (metric == "cpu") v.push_back(o->cpu_seconds);
      else throw ValidationError("unknown metric '" + metric + "'");
    }
    return v;
  }

  PercentileCI ci(const std::string& metric) const {
    const auto v = values(metric);
    if (v.empty()) throw ValidationError("distribution '" + name + "' has no successful runs");
    return percentile_ci(v);
  }

  double total_cpu_seconds() const {
    double s = 0.0;
    for (const auto* o : succeeded()) s += o->cpu_seconds;
    return s;
  }
  double total_wall_seconds() const {
    double s = 0.0;
    for (const auto* o : succeeded()) s += o->wall_seconds;
    return s;
  }
};

using Experiment = std::function<RunOutcome(std::uint64_t seed, int run_index)>;

/// Runs the experiment n_runs times. Failures are recorded, not fatal.
inline RunDistribution repeated_runs(const Experiment& experiment, int n_runs, std::uint64_t base_seed,
                                     std::string name = {}, int threads = 0) {
  if (n_runs < 1) throw ValidationError("n_runs must be positive");
  RunDistribution dist;
  dist.name = std::move(name);
  dist.runs.resize(static_cast<std::size_t>(n_runs));
  for (int k = 0; k < n_runs; ++k) dist.runs[k] = {k, derive_seed(base_seed, "run", static_cast<std::uint64_t>(k)), {}, {}};

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < n_runs; k = next++) {
      RunRecord& r = dist.runs[static_cast<std::size_t>(k)];
      try {
        r.outcome = experiment(r.seed, k);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const int n_threads = std::min(threads > 0 ? threads : thread_cap(), n_runs);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& r : dist.runs)
    if (!r.outcome) dist.warnings.push_back("run " + std::to_string(r.index) + " failed: " + r.error);
  if (!dist.warnings.empty())
    std::cerr << "warning: " << dist.name << ": " << dist.warnings.size() << " of " << n_runs << " runs failed\n";
  return dist;
}

}  // namespace xferlos
