#pragma once

// Line-delimited JSON logs and delimiter-separated report tables.

#include "xferlos/eval/runs.hpp"
#include "xferlos/eval/timing.hpp"
#include "xferlos/explain/expected_gradients.hpp"
#include "xferlos/hpo/bayesian.hpp"
#include "xferlos/io/checkpoint.hpp"
#include "xferlos/io/csv.hpp"
#include "xferlos/training/trainer.hpp"

#include <nlohmann/json.hpp>

#include <ostream>

namespace xferlos {

inline nlohmann::json train_report_json(const TrainReport& r) {
  return {{"train_loss", r.train_loss},       {"val_loss", r.val_loss},
          {"epochs_to_converge", r.epochs_to_converge}, {"best_epoch", r.best_epoch},
          {"early_stopped", r.early_stopped}, {"stagnated", r.stagnated},
          {"wall_seconds", r.wall_seconds},   {"cpu_seconds", r.cpu_seconds}};
}

inline nlohmann::json trial_json(const Trial& t, int step = -1) {
  nlohmann::json j{{"trial", t.index}, {"config", hyperparameters_json(t.config)}, {"losses", t.losses},
                   {"failed", t.failed}};
  if (step >= 0) j["step"] = step;
  if (t.failed) j["error"] = t.error;
  else j["mean_loss"] = t.mean_loss;
  return j;
}

/// One JSON object per trial.
inline void write_trial_log(std::ostream& out, const std::vector<Trial>& trials, int step = -1) {
  for (const auto& t : trials) out << trial_json(t, step).dump() << "\n";
}

/// rank,feature,score
inline void write_ranking(std::ostream& out, const ImportanceRanking& r) {
  out << "rank,feature,score\n";
  for (std::size_t i = 0; i < r.entries.size(); ++i)
    out << i + 1 << ',' << csv_field(r.entries[i].feature) << ',' << format_double(r.entries[i].score) << '\n';
}

/// Side-by-side top-k table for plotting a before/after comparison.
inline void write_topk_comparison(std::ostream& out, const ImportanceRanking& before, const ImportanceRanking& after,
                                  std::size_t k = 25) {
  out << "rank,before_feature,before_score,after_feature,after_score\n";
  const auto b = before.top(k), a = after.top(k);
  for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    out << i + 1 << ',';
    if (i < b.size()) out << csv_field(b[i].feature) << ',' << format_double(b[i].score);
    else out << ',';
    out << ',';
    if (i < a.size()) out << csv_field(a[i].feature) << ',' << format_double(a[i].score);
    else out << ',';
    out << '\n';
  }
}

inline void write_long_format_header(std::ostream& out) { out << "experiment,run,metric,value\n"; }

/// experiment,run,metric,value rows for every successful run.
inline void write_long_format(std::ostream& out, const RunDistribution& d) {
  for (const auto& r : d.runs) {
    if (!r.outcome) continue;
    const RunOutcome& o = *r.outcome;
    const std::pair<const char*, double> rows[] = {{"mae", o.test.mae},
                                                   {"mape", o.test.mape},
                                                   {"mse", o.test.mse},
                                                   {"epochs", static_cast<double>(o.epochs_to_converge)},
                                                   {"best_epoch", static_cast<double>(o.best_epoch)},
                                                   {"stagnated", o.stagnated ? 1.0 : 0.0},
                                                   {"wall_seconds", o.wall_seconds},
                                                   {"cpu_seconds", o.cpu_seconds}};
    for (const auto& [name, v] : rows)
      out << csv_field(d.name) << ',' << r.index << ',' << name << ',' << format_double(v) << '\n';
  }
}

inline void write_ci_header(std::ostream& out) {
  out << "experiment,metric,n_runs,n_failed,stagnated,p2_5,median,p97_5\n";
}

inline void write_ci_rows(std::ostream& out, const RunDistribution& d) {
  for (const char* metric : {"mae", "mape", "mse", "epochs"}) {
    const PercentileCI ci = d.ci(metric);
    out << csv_field(d.name) << ',' << metric << ',' << d.succeeded().size() << ',' << d.n_failed() << ','
        << d.stagnation_count() << ',' << format_double(ci.lower) << ',' << format_double(ci.median) << ','
        << format_double(ci.upper) << '\n';
  }
}

inline void write_welch_header(std::ostream& out) { out << "target,metric,group_a,group_b,t,df,p,stars\n"; }

inline void write_welch_row(std::ostream& out, const std::string& target, const std::string& metric,
                            const std::string& a, const std::string& b, const WelchResult& r) {
  out << csv_field(target) << ',' << metric << ',' << csv_field(a) << ',' << csv_field(b) << ','
      << format_double(r.t) << ',' << format_double(r.df) << ',' << format_double(r.p) << ',' << r.stars << '\n';
}

inline void write_tukey_header(std::ostream& out) {
  out << "target,metric,group1,group2,mean_diff,p_adj,lower,upper,reject\n";
}

inline void write_tukey_rows(std::ostream& out, const std::string& target, const std::string& metric,
                             const std::vector<TukeyPair>& pairs) {
  for (const auto& p : pairs)
    out << csv_field(target) << ',' << metric << ',' << csv_field(p.group1) << ',' << csv_field(p.group2) << ','
        << format_double(p.mean_diff) << ',' << format_double(p.p_adj) << ',' << format_double(p.lower) << ','
        << format_double(p.upper) << ',' << (p.reject ? "true" : "false") << '\n';
}

inline void write_timing(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "experiment,kind,runs,wall_hours,cpu_hours\n";
  for (const auto& r : rows)
    out << csv_field(r.experiment) << ',' << r.kind << ',' << r.runs << ',' << format_double(r.wall_hours) << ','
        << format_double(r.cpu_hours) << '\n';
}

}  // namespace xferlos
