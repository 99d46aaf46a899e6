#pragma once

// Source-to-target experiments: training modes, the synthetic overlap suite and the
// repeated-run comparison.

#include "xferlos/dataprep/synth.hpp"
#include "xferlos/eval/runs.hpp"
#include "xferlos/eval/timing.hpp"
#include "xferlos/transfer/transfer.hpp"

#include <cstdio>
#include <map>

namespace xferlos {

enum class Mode { scratch, weight_transfer, full_transfer, discriminative };

struct ModeSpec {
  Mode mode = Mode::scratch;
  double alpha = 0.1;  // discriminative only

  /// scratch, weight_transfer, full_transfer or discriminative(alpha).
  std::string label() const {
    switch (mode) {
      case Mode::scratch: return "scratch";
      case Mode::weight_transfer: return "weight_transfer";
      case Mode::full_transfer: return "full_transfer";
      case Mode::discriminative: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "discriminative(%g)", alpha);
        return buf;
      }
    }
    return "?";
  }
  /// Timing-table code.
  std::string kind() const {
    switch (mode) {
      case Mode::scratch: return "OP";
      case Mode::weight_transfer: return "WT";
      case Mode::full_transfer: return "FT";
      default: return "DL";
    }
  }
};

inline ModeSpec parse_mode(const std::string& name, double alpha = 0.1) {
  if (name == "scratch") return {Mode::scratch, alpha};
  if (name == "weight_transfer") return {Mode::weight_transfer, alpha};
  if (name == "full_transfer") return {Mode::full_transfer, alpha};
  if (name == "discriminative") return {Mode::discriminative, alpha};
  throw ValidationError("unknown mode '" + name + "' (scratch, weight_transfer, full_transfer, discriminative)");
}

struct ExperimentSettings {
  Hyperparameters source_hp{1, 16, 3e-3, 0.1, 32};
  int target_batch_size = 32;
  int max_epochs = 100;
  int patience = 6;
  double min_relative_improvement = 0.005;
};

/// A trained source model together with its optimizer state.
struct SourceModel {
  LstmModel model;
  AdamState optimizer;
  TrainReport report;
  ScalingStats scaling;
};

inline TrainConfig train_config(const Hyperparameters& hp, const ExperimentSettings& s) {
  TrainConfig cfg;
  cfg.learning_rate = hp.learning_rate;
  cfg.batch_size = hp.batch_size;
  cfg.max_epochs = s.max_epochs;
  cfg.patience = s.patience;
  cfg.min_relative_improvement = s.min_relative_improvement;
  return cfg;
}

inline SourceModel train_source(const Cohort& source, const ExperimentSettings& s, std::uint64_t seed) {
  SplitDatasets d = split_dataset(source, derive_seed(seed, "source-split"));
  Rng init = make_rng(seed, "source-init");
  LstmModel model = LstmModel::initialize(d.train.features, s.source_hp, init);
  TrainResult r = train(std::move(model), d.train.data, d.val.data, train_config(s.source_hp, s),
                        derive_seed(seed, "source-train"));
  return {std::move(r.model), std::move(r.optimizer), std::move(r.report), d.train.scaling};
}

/// Throws TransferPreconditionError before any training when the mode cannot apply to the target.
inline void check_mode(const ModeSpec& mode, const FeatureSpace& source, const FeatureSpace& target) {
  if (mode.mode == Mode::full_transfer) {
    const TransferPlan plan = compute_feature_alignment(source, target);
    if (!plan.non_coinciding.empty()) {
      std::vector<std::string> blocking;
      for (std::size_t t : plan.non_coinciding) blocking.push_back(target.name(t));
      throw TransferPreconditionError(std::move(blocking));
    }
  }
  if (mode.mode == Mode::discriminative && !(mode.alpha > 0.0 && mode.alpha <= 1.0))
    throw ValidationError("alpha must lie in (0, 1]");
}

struct TargetRun {
  TrainResult result;
  DomainDataset test;
  ScalingStats scaling;  // training-split statistics
};

/// One run on a target: split with the run seed, initialize per mode, train with early stopping.
inline TargetRun train_target(const Cohort& target, const SourceModel* source, const ModeSpec& mode,
                              const ExperimentSettings& s, std::uint64_t seed) {
  SplitDatasets d = split_dataset(target, derive_seed(seed, "split"));
  const FeatureSpace& space = d.train.features;
  Rng init = make_rng(seed, "init");
  if (mode.mode != Mode::scratch && source == nullptr) throw ValidationError(mode.label() + " needs a source model");

  Hyperparameters hp = transfer_hyperparameters(s.source_hp, s.target_batch_size);
  LstmModel model;
  TrainConfig cfg = train_config(hp, s);
  switch (mode.mode) {
    case Mode::scratch:
      model = LstmModel::initialize(space, hp, init);
      break;
    case Mode::weight_transfer:
      model = transfer_weights(source->model, space, init, {s.target_batch_size, false});
      break;
    case Mode::full_transfer: {
      FullTransfer ft = full_model_transfer(source->model, source->optimizer, space, s.target_batch_size);
      model = std::move(ft.model);
      cfg.initial_state = std::move(ft.optimizer);
      break;
    }
    case Mode::discriminative: {
      const TransferPlan plan = compute_feature_alignment(source->model.features, space);
      model = transfer_weights(source->model, space, plan, init, {s.target_batch_size, false});
      cfg.groups = assign_learning_rates(plan, hp.learning_rate, mode.alpha);
      break;
    }
  }
  TrainResult r = train(std::move(model), d.train.data, d.val.data, cfg, derive_seed(seed, "train"));
  return {std::move(r), std::move(d.test), d.train.scaling};
}

inline RunOutcome run_target(const Cohort& target, const SourceModel* source, const ModeSpec& mode,
                             const ExperimentSettings& s, std::uint64_t seed) {
  TargetRun tr = train_target(target, source, mode, s, seed);
  RunOutcome o;
  o.test = compute_metrics(tr.result.model.predict(tr.test.data.inputs), tr.test.data.targets);
  o.epochs_to_converge = tr.result.report.epochs_to_converge;
  o.best_epoch = tr.result.report.best_epoch;
  o.stagnated = tr.result.report.stagnated;
  o.wall_seconds = tr.result.report.wall_seconds;
  o.cpu_seconds = tr.result.report.cpu_seconds;
  return o;
}

// ---------------------------------------------------------------------------
// Synthetic overlap suite

inline constexpr const char* kSuiteSource = "med-surg";

/// Target label -> (shared inputs taken from the source, private inputs).
inline const std::vector<std::tuple<std::string, int, int>>& suite_targets() {
  static const std::vector<std::tuple<std::string, int, int>> t{
      {"ccu-cticu", 25, 2}, {"micu", 23, 1}, {"cticu", 25, 8}, {"csicu", 24, 11}};
  return t;
}
inline constexpr const char* kSuiteSubsetTarget = "neuro";
inline constexpr int kSuiteSubsetInputs = 20;

/// Source with 25 inputs, four targets with the overlap structure (25+2, 23+1, 25+8, 24+11)
/// and one target whose inputs are a subset of the source's.
inline SynthConfig overlap_suite_config(std::uint64_t seed = 7, int target_stays = 220, int source_stays = 1200) {
  SynthConfig c;
  c.seed = seed;
  auto two = [](int i) { return (i < 10 ? "0" : "") + std::to_string(i); };
  std::vector<std::string> shared;
  for (int i = 1; i <= 25; ++i) {
    const double r = ((i * 37) % 11) / 10.0;
    SynthFeature f{"vital " + two(i), true, 20.0 + 7.0 * (i % 9), 1.0 + (i % 4), 0.35 + 0.5 * r,
                   0.3 + 0.4 * (1.0 - r), (i % 3 == 0 ? 0.01 : 0.0)};
    c.pool.push_back(f);
    shared.push_back(f.name);
  }
  auto privates = [&](const std::string& label, int n) {
    std::vector<std::string> names;
    for (int k = 1; k <= n; ++k) {
      const double r = ((k * 53) % 7) / 6.0;
      c.pool.push_back({label + " lab " + two(k), false, 5.0 + 3.0 * k, 0.5 + 0.25 * k, 0.5 + 0.4 * r, 0.3, 0.0});
      names.push_back(label + " lab " + two(k));
    }
    return names;
  };
  c.domains.push_back({kSuiteSource, source_stays, shared, 0.3, 0.0, 1.3, 0.0, 3});
  const double sev_mean[] = {0.2, -0.1, 0.3, 0.1};
  const double sev_sd[] = {0.8, 0.9, 0.7, 0.8};
  const double priv[] = {0.1, 0.1, 0.2, 0.3};
  int k = 0;
  for (const auto& [label, n_shared, n_priv] : suite_targets()) {
    std::vector<std::string> f(shared.begin(), shared.begin() + n_shared);
    for (auto& p : privates(label, n_priv)) f.push_back(p);
    c.domains.push_back({label, target_stays, f, 0.35, sev_mean[k], sev_sd[k], priv[k], 2});
    ++k;
  }
  c.domains.push_back({kSuiteSubsetTarget, target_stays,
                       std::vector<std::string>(shared.begin(), shared.begin() + kSuiteSubsetInputs), 0.35, -0.2,
                       0.9, 0.0, 2});
  return c;
}

/// Prepared cohorts keyed by domain label.
inline std::map<std::string, Cohort> prepare_synth_cohorts(const SynthConfig& cfg) {
  std::map<std::string, Cohort> out;
  for (auto& d : synth_generate(cfg)) out.emplace(d.events.domain, prepare_cohort(d.events));
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonResult {
  std::map<std::string, std::map<std::string, RunDistribution>> runs;  // target -> mode label -> runs
  struct WelchRow {
    std::string target, metric, baseline, mode;
    WelchResult result;
  };
  std::vector<WelchRow> welch;                                          // scratch vs each transfer mode
  std::map<std::string, std::map<std::string, std::vector<TukeyPair>>> tukey;  // target -> metric -> pairs
  std::vector<TimingEntry> timing;
};

struct CompareOptions {
  std::vector<std::string> targets;
  std::vector<ModeSpec> modes;
  int n_runs = 100;
  std::uint64_t seed = 1;
  int threads = 0;
  std::vector<std::string> metrics{"epochs", "mae"};
};

/// Runs every (target, mode) pair n_runs times with paired run seeds, then tests each
/// transfer mode against scratch (Welch) and all modes jointly (Tukey HSD).
inline ComparisonResult compare(const std::map<std::string, Cohort>& cohorts, const SourceModel* source,
                                const ExperimentSettings& s, const CompareOptions& opt) {
  if (opt.targets.empty() || opt.modes.empty()) throw ValidationError("compare needs targets and modes");
  for (const auto& t : opt.targets) {
    auto it = cohorts.find(t);
    if (it == cohorts.end()) throw ValidationError("unknown target domain '" + t + "'");
    for (const auto& m : opt.modes) {
      if (m.mode == Mode::scratch) continue;
      if (source == nullptr) throw ValidationError(m.label() + " needs a source model");
      check_mode(m, source->model.features, it->second.feature_space());
    }
  }
  ComparisonResult res;
  for (const auto& t : opt.targets) {
    const Cohort& cohort = cohorts.at(t);
    for (const auto& m : opt.modes) {
      Experiment e = [&](std::uint64_t seed, int) { return run_target(cohort, source, m, s, seed); };
      RunDistribution d = repeated_runs(e, opt.n_runs, derive_seed(opt.seed, t), t + "/" + m.label(), opt.threads);
      for (const auto* o : d.succeeded()) res.timing.push_back({t, m.kind(), o->wall_seconds, o->cpu_seconds});
      res.runs[t][m.label()] = std::move(d);
    }
    const auto& by_mode = res.runs[t];
    for (const auto& metric : opt.metrics) {
      if (by_mode.count("scratch"))
        for (const auto& m : opt.modes) {
          if (m.mode == Mode::scratch) continue;
          try {
            res.welch.push_back({t, metric, "scratch", m.label(),
                                 welch_t_test(by_mode.at("scratch").values(metric), by_mode.at(m.label()).values(metric))});
          } catch (const ValidationError& e) {
            std::cerr << "warning: no Welch test for " << t << " " << m.label() << ": " << e.what() << "\n";
          }
        }
      if (opt.modes.size() >= 2) {
        std::vector<LabeledSample> groups;
        for (const auto& m : opt.modes) groups.push_back({m.label(), by_mode.at(m.label()).values(metric)});
        try {
          res.tukey[t][metric] = tukey_hsd(groups);
        } catch (const ValidationError& e) {
          std::cerr << "warning: no Tukey HSD for " << t << ": " << e.what() << "\n";
        }
      }
    }
  }
  return res;
}

}  // namespace xferlos
