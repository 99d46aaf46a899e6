// xferlos: command-line front end for the LoS transfer-learning pipeline.
//
//   xferlos synth    [--config synth.json] [--seed N] --out DIR
//   xferlos prep     --events F --targets F --domain L --out DIR
//   xferlos tune     --target COHORT --seed N --out hp.json
//   xferlos train    --target COHORT [--config hp.json] --seed N --out DIR
//   xferlos transfer --source CKPT --target COHORT --mode M [--alpha A] --seed N --out DIR
//   xferlos explain  --checkpoint CKPT --target COHORT [--samples N] [--background-size N] --out DIR
//   xferlos compare  [--config experiment.json] [--runs N] [--seed N] --out DIR
//
// Exit codes: 0 success, 2 invalid input, 3 numeric or runtime failure.

#include "xferlos/experiments/benchmark.hpp"
#include "xferlos/hpo/three_step.hpp"
#include "xferlos/io/cohort_store.hpp"
#include "xferlos/io/reports.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace xferlos;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed JSON in '" + path + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  return out;
}

Hyperparameters read_hyperparameters(const std::string& path) {
  const json j = read_json(path);
  return hyperparameters_from_json(j.contains("hyperparameters") ? j.at("hyperparameters") : j);
}

struct Options {
  std::string config, out, mode = "weight_transfer", source, target, checkpoint;
  std::string events, targets, domain;
  std::uint64_t seed = 1;
  double alpha = 0.1;
  int runs = 100, background_size = 200, samples = 200, max_epochs = 100;
};

// ---------------------------------------------------------------------------

void cmd_synth(const Options& o) {
  SynthConfig cfg = o.config.empty() ? overlap_suite_config(o.seed) : read_json(o.config).get<SynthConfig>();
  if (o.config.empty()) cfg.seed = o.seed;
  const auto domains = synth_generate(cfg);
  fs::create_directories(o.out);
  write_json(fs::path(o.out) / "synth_config.json", json(cfg));
  for (const auto& d : domains) {
    const fs::path dir = fs::path(o.out) / d.events.domain;
    fs::create_directories(dir);
    write_event_table(d.events, (dir / "events.csv").string(), (dir / "targets.csv").string());
    std::cout << d.events.domain << ": " << d.events.los_days.size() << " stays, " << d.events.records.size()
              << " events -> " << dir.string() << "\n";
  }
}

void cmd_prep(const Options& o) {
  const EventTable events = read_event_table(o.events, o.targets, o.domain);
  const Cohort c = prepare_cohort(events);
  save_cohort(c, o.out);
  std::cout << c.domain << ": " << c.size() << " stays, " << c.inputs.size() << " retained inputs, width "
            << 2 * c.inputs.size() + 1 << "\n";
}

void cmd_tune(const Options& o) {
  const Cohort c = load_cohort(o.target);
  const SplitDatasets d = split_dataset(c, derive_seed(o.seed, "split"));
  TuningOptions t;
  t.search.seed = o.seed;
  t.search_max_epochs = o.max_epochs;
  t.final_max_epochs = o.max_epochs;
  const TuningResult r = tune_and_fit(d.train.features, d.train.data, d.val.data, t);
  fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto interval = r.search.refined_hidden_interval();
  write_json(out, {{"hyperparameters", hyperparameters_json(r.search.best)},
                   {"best_loss", r.search.best_loss},
                   {"winning_step", r.search.winning_step + 1},
                   {"refined_hidden_interval", {interval.lo, interval.hi}},
                   {"domain", c.domain},
                   {"seed", o.seed}});
  std::ofstream log = open_out(out.string() + ".trials.jsonl");
  for (int s = 0; s < 3; ++s) write_trial_log(log, r.search.steps[s].trials, s + 1);
  std::cout << "best " << hyperparameters_json(r.search.best).dump() << " loss " << r.search.best_loss << "\n";
}

void save_run(const Options& o, const TargetRun& run, const Cohort& c) {
  fs::create_directories(o.out);
  Checkpoint ck{run.result.model, std::nullopt, run.scaling, c.domain, o.seed, cohort_hash(c)};
  if (!run.result.optimizer.first_moment.empty()) ck.optimizer = run.result.optimizer;
  save_checkpoint((fs::path(o.out) / "checkpoint.json").string(), ck);
  const MetricReport m = compute_metrics(run.result.model.predict(run.test.data.inputs), run.test.data.targets);
  json report = train_report_json(run.result.report);
  report["test"] = {{"mae", m.mae}, {"mape", m.mape}, {"mse", m.mse}, {"n", m.n}};
  write_json(fs::path(o.out) / "report.json", report);
  std::cout << c.domain << ": " << run.result.report.epochs_to_converge << " epochs (best " << run.result.report.best_epoch
            << "), test MAE " << m.mae << "\n";
}

void cmd_train(const Options& o) {
  const Cohort c = load_cohort(o.target);
  ExperimentSettings s;
  if (!o.config.empty()) s.source_hp = read_hyperparameters(o.config);
  s.target_batch_size = s.source_hp.batch_size;
  s.max_epochs = o.max_epochs;
  save_run(o, train_target(c, nullptr, {Mode::scratch}, s, o.seed), c);
}

void cmd_transfer(const Options& o) {
  const Checkpoint src = load_checkpoint(o.source);
  const Cohort c = load_cohort(o.target);
  const ModeSpec mode = parse_mode(o.mode, o.alpha);
  check_mode(mode, src.model.features, c.feature_space());
  if (mode.mode == Mode::full_transfer && !src.optimizer)
    throw ValidationError("full_transfer needs a source checkpoint with optimizer state");
  ExperimentSettings s;
  s.source_hp = src.model.hyper;
  s.max_epochs = o.max_epochs;
  SourceModel source{src.model, src.optimizer.value_or(AdamState{}), {}, src.scaling.value_or(ScalingStats{})};
  save_run(o, train_target(c, &source, mode, s, o.seed), c);
}

void cmd_explain(const Options& o) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Cohort c = load_cohort(o.target);
  if (!ck.scaling) throw ValidationError("checkpoint has no scaling statistics");
  if (ck.manifest_hash != cohort_hash(c))
    throw ValidationError("checkpoint was trained on a different dataset (hash " + ck.manifest_hash + ")");
  const SplitIndices idx = split_indices(c.size(), derive_seed(ck.seed, "split"));
  const DomainDataset train = materialize(c, idx.train, *ck.scaling);
  const DomainDataset test = materialize(c, idx.test, *ck.scaling);
  const Sequence background = sample_background(train.data.inputs, o.seed, o.background_size);
  ExpectedGradientsOptions eg;
  eg.n_samples = o.samples;
  eg.seed = o.seed;
  const AttributionTensor attr = expected_gradients(ck.model, test.data.inputs, background, eg);
  const ImportanceRanking ranking = global_importance(attr, ck.model.features);
  fs::create_directories(o.out);
  std::ofstream r = open_out(fs::path(o.out) / "ranking.csv");
  write_ranking(r, ranking);
  write_json(fs::path(o.out) / "explain.json", {{"domain", c.domain},
                                                {"stays", test.size()},
                                                {"background_size", background.front().rows()},
                                                {"samples", o.samples},
                                                {"seed", o.seed}});
  for (const auto& e : ranking.top(10)) std::cout << e.feature << "  " << e.score << "\n";
}

// Experiment config: {"synth": {...} | "data": {label: cohort dir}, "source": label,
// "targets": [...], "modes": [...], "alpha": 0.1, "runs": 100, "seed": 1, "hpo": false,
// "hyperparameters": {...}, "max_epochs": 100}
void cmd_compare(const Options& o, bool runs_set, bool seed_set) {
  json cfg = o.config.empty() ? json::object() : read_json(o.config);
  std::map<std::string, Cohort> cohorts;
  if (cfg.contains("data")) {
    for (const auto& [label, dir] : cfg["data"].items()) cohorts.emplace(label, load_cohort(dir.get<std::string>()));
  } else {
    const SynthConfig synth = cfg.contains("synth") ? cfg["synth"].get<SynthConfig>() : overlap_suite_config();
    cohorts = prepare_synth_cohorts(synth);
  }
  const std::string source_label = cfg.value("source", std::string(kSuiteSource));
  if (!cohorts.count(source_label)) throw ValidationError("unknown source domain '" + source_label + "'");

  CompareOptions co;
  if (cfg.contains("targets")) {
    co.targets = cfg["targets"].get<std::vector<std::string>>();
  } else {
    for (const auto& [label, shared, priv] : suite_targets()) co.targets.push_back(label);
  }
  const double alpha = cfg.value("alpha", o.alpha);
  for (const auto& m : cfg.value("modes", std::vector<std::string>{"scratch", "weight_transfer"}))
    co.modes.push_back(parse_mode(m, alpha));
  co.n_runs = runs_set ? o.runs : cfg.value("runs", o.runs);
  co.seed = seed_set ? o.seed : cfg.value("seed", o.seed);

  ExperimentSettings s;
  if (cfg.contains("hyperparameters")) s.source_hp = hyperparameters_from_json(cfg["hyperparameters"]);
  s.max_epochs = cfg.value("max_epochs", s.max_epochs);
  const Cohort& src_cohort = cohorts.at(source_label);
  // Preconditions first, so a bad mode fails before hours of training.
  for (const auto& t : co.targets) {
    if (!cohorts.count(t)) throw ValidationError("unknown target domain '" + t + "'");
    for (const auto& m : co.modes) check_mode(m, src_cohort.feature_space(), cohorts.at(t).feature_space());
  }
  if (cfg.value("hpo", false)) {
    const SplitDatasets d = split_dataset(src_cohort, derive_seed(co.seed, "source-split"));
    TuningOptions t;
    t.search.seed = derive_seed(co.seed, "source-hpo");
    s.source_hp = tune_and_fit(d.train.features, d.train.data, d.val.data, t).search.best;
  }
  const SourceModel source = train_source(src_cohort, s, derive_seed(co.seed, "source"));
  std::cout << "source " << source_label << ": " << source.report.epochs_to_converge << " epochs\n";
  const ComparisonResult r = compare(cohorts, &source, s, co);

  const fs::path out(o.out);
  fs::create_directories(out);
  std::ofstream runs = open_out(out / "runs.csv"), ci = open_out(out / "ci.csv");
  std::ofstream welch = open_out(out / "welch.csv"), tukey = open_out(out / "tukey.csv");
  std::ofstream timing = open_out(out / "timing.csv");
  write_long_format_header(runs);
  write_ci_header(ci);
  for (const auto& [t, by_mode] : r.runs)
    for (const auto& [m, d] : by_mode) {
      write_long_format(runs, d);
      write_ci_rows(ci, d);
    }
  write_welch_header(welch);
  for (const auto& w : r.welch) write_welch_row(welch, w.target, w.metric, w.baseline, w.mode, w.result);
  write_tukey_header(tukey);
  for (const auto& [t, by_metric] : r.tukey)
    for (const auto& [metric, pairs] : by_metric) write_tukey_rows(tukey, t, metric, pairs);
  write_timing(timing, cpu_time_report(r.timing));
  for (const auto& w : r.welch)
    std::cout << w.target << " " << w.metric << " scratch vs " << w.mode << ": p=" << w.result.p << " "
              << w.result.stars << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer learning for ICU length-of-stay prediction"};
  app.require_subcommand(1);
  Options o;
  auto seed_opt = [&](CLI::App* c) { return c->add_option("--seed", o.seed, "Experiment seed"); };
  auto out_opt = [&](CLI::App* c) { c->add_option("--out", o.out, "Output path")->required(); };
  auto epochs_opt = [&](CLI::App* c) { c->add_option("--max-epochs", o.max_epochs, "Epoch cap")->check(CLI::PositiveNumber); };

  auto* synth = app.add_subcommand("synth", "Generate synthetic event tables");
  synth->add_option("--config", o.config, "Synthetic config (JSON); default is the bundled benchmark suite");
  seed_opt(synth);
  out_opt(synth);

  auto* prep = app.add_subcommand("prep", "Prepare a cohort from event tables");
  prep->add_option("--events", o.events, "Long-format events CSV")->required();
  prep->add_option("--targets", o.targets, "stay_id,los_days CSV")->required();
  prep->add_option("--domain", o.domain, "Domain label")->required();
  out_opt(prep);

  auto* tune = app.add_subcommand("tune", "Three-step Bayesian hyperparameter search");
  tune->add_option("--target", o.target, "Cohort directory")->required();
  seed_opt(tune);
  epochs_opt(tune);
  out_opt(tune);

  auto* trn = app.add_subcommand("train", "Train a model from scratch");
  trn->add_option("--target", o.target, "Cohort directory")->required();
  trn->add_option("--config", o.config, "Hyperparameters (JSON)");
  seed_opt(trn);
  epochs_opt(trn);
  out_opt(trn);

  auto* xfer = app.add_subcommand("transfer", "Train on a target from a source checkpoint");
  xfer->add_option("--source", o.source, "Source checkpoint")->required();
  xfer->add_option("--target", o.target, "Target cohort directory")->required();
  xfer->add_option("--mode", o.mode, "weight_transfer, full_transfer, discriminative or scratch");
  xfer->add_option("--alpha", o.alpha, "Learning-rate factor for pre-trained rows");
  seed_opt(xfer);
  epochs_opt(xfer);
  out_opt(xfer);

  auto* expl = app.add_subcommand("explain", "Expected-gradients feature ranking");
  expl->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  expl->add_option("--target", o.target, "Cohort the checkpoint was trained on")->required();
  expl->add_option("--samples", o.samples, "Samples per stay")->check(CLI::PositiveNumber);
  expl->add_option("--background-size", o.background_size, "Background stays")->check(CLI::PositiveNumber);
  seed_opt(expl);
  out_opt(expl);

  auto* cmp = app.add_subcommand("compare", "Repeated-run comparison of training modes");
  cmp->add_option("--config", o.config, "Experiment config (JSON); default is the bundled benchmark");
  auto* runs_flag = cmp->add_option("--runs", o.runs, "Runs per (target, mode)")->check(CLI::PositiveNumber);
  auto* cmp_seed = seed_opt(cmp);
  cmp->add_option("--alpha", o.alpha, "Default learning-rate factor for discriminative mode");
  out_opt(cmp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) cmd_synth(o);
    else if (*prep) cmd_prep(o);
    else if (*tune) cmd_tune(o);
    else if (*trn) cmd_train(o);
    else if (*xfer) cmd_transfer(o);
    else if (*expl) cmd_explain(o);
    else if (*cmp) cmd_compare(o, runs_flag->count() > 0, cmp_seed->count() > 0);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
