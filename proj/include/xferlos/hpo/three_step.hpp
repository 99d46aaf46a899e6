#pragma once

// Three-step search: hidden units in [8, 64], then [64, 512] (batch size fixed in both),
// then a refined space around the better of the two with batch size searched as well.

#include "xferlos/core/dataset.hpp"
#include "xferlos/hpo/bayesian.hpp"
#include "xferlos/training/trainer.hpp"

namespace xferlos {

struct ThreeStepOptions {
  SearchSpace space;            // full bounds
  double hidden_split = 64;     // boundary between the step 1 and step 2 hidden intervals
  int fixed_batch_size = 32;    // batch size during steps 1 and 2
  int trials_per_step = 10;
  int executions_first = 2;     // steps 1 and 2
  int executions_refined = 3;   // step 3
  int n_initial = 3;
  bool random_only = false;
  std::uint64_t seed = 0;
};

struct ThreeStepResult {
  std::array<SearchSpace, 3> spaces;
  std::array<SearchResult, 3> steps;
  int winning_step = 0;  // 0 or 1: which hidden interval step 3 refined
  Hyperparameters best;
  double best_loss = 0.0;

  Bounds refined_hidden_interval() const { return spaces[2].hidden_units; }
};

/// Step 3 space: the winner's hidden interval, learning rate within one decade and
/// dropout within 0.1 of the winner (clipped to the full bounds), batch size over its full range.
inline SearchSpace refine_space(const SearchSpace& full, const SearchSpace& winner_space, const Hyperparameters& w) {
  SearchSpace s = full;
  s.hidden_units = winner_space.hidden_units;
  s.learning_rate.lo = std::max(full.learning_rate.lo, w.learning_rate / 10.0);
  s.learning_rate.hi = std::min(full.learning_rate.hi, w.learning_rate * 10.0);
  s.dropout_rate.lo = std::max(full.dropout_rate.lo, w.dropout_rate - 0.1);
  s.dropout_rate.hi = std::min(full.dropout_rate.hi, w.dropout_rate + 0.1);
  return s;
}

inline ThreeStepResult three_step_search(const Objective& objective, const ThreeStepOptions& opt) {
  opt.space.validate();
  if (!(opt.hidden_split > opt.space.hidden_units.lo && opt.hidden_split < opt.space.hidden_units.hi))
    throw ValidationError("hidden_split must lie strictly inside the hidden-unit bounds");
  ThreeStepResult r;
  const double fb = opt.fixed_batch_size;
  for (int step = 0; step < 2; ++step) {
    SearchSpace s = opt.space;
    s.batch_size = {fb, fb, Scale::log2};
    if (step == 0) s.hidden_units.hi = opt.hidden_split;
    else s.hidden_units.lo = opt.hidden_split;
    r.spaces[step] = s;
    BayesOptions b{opt.trials_per_step, opt.executions_first, opt.n_initial, 2000, opt.random_only,
                   derive_seed(opt.seed, "step", static_cast<std::uint64_t>(step))};
    r.steps[step] = bayesian_search(s, objective, b);
  }
  r.winning_step = r.steps[1].best_loss < r.steps[0].best_loss ? 1 : 0;
  r.spaces[2] = refine_space(opt.space, r.spaces[r.winning_step], r.steps[r.winning_step].best);
  BayesOptions b3{opt.trials_per_step, opt.executions_refined, opt.n_initial, 2000, opt.random_only,
                  derive_seed(opt.seed, "step", 2)};
  r.steps[2] = bayesian_search(r.spaces[2], objective, b3);
  r.best = r.steps[2].best;
  r.best_loss = r.steps[2].best_loss;
  return r;
}

struct TuningOptions {
  ThreeStepOptions search;
  int search_max_epochs = 100;  // per execution during the search
  int final_max_epochs = 100;
};

struct TuningResult {
  ThreeStepResult search;
  TrainResult final_fit;
};

/// Minimum validation MSLE of a model trained with `hp`; initialization and shuffling follow `seed`.
inline double validation_objective(const FeatureSpace& features, const LabeledSequences& train_set,
                                   const LabeledSequences& val_set, const Hyperparameters& hp, std::uint64_t seed,
                                   int max_epochs) {
  Rng init = make_rng(seed, "init");
  LstmModel model = LstmModel::initialize(features, hp, init);
  TrainConfig cfg;
  cfg.learning_rate = hp.learning_rate;
  cfg.batch_size = hp.batch_size;
  cfg.max_epochs = max_epochs;
  return train(std::move(model), train_set, val_set, cfg, seed).report.best_val_loss();
}

/// Runs the three-step search on a dataset and fits the final model with early stopping.
inline TuningResult tune_and_fit(const FeatureSpace& features, const LabeledSequences& train_set,
                                 const LabeledSequences& val_set, const TuningOptions& opt) {
  TuningResult out;
  Objective obj = [&](const Hyperparameters& hp, std::uint64_t seed) {
    return validation_objective(features, train_set, val_set, hp, seed, opt.search_max_epochs);
  };
  out.search = three_step_search(obj, opt.search);
  const std::uint64_t final_seed = derive_seed(opt.search.seed, "final");
  Rng init = make_rng(final_seed, "init");
  LstmModel model = LstmModel::initialize(features, out.search.best, init);
  TrainConfig cfg;
  cfg.learning_rate = out.search.best.learning_rate;
  cfg.batch_size = out.search.best.batch_size;
  cfg.max_epochs = opt.final_max_epochs;
  out.final_fit = train(std::move(model), train_set, val_set, cfg, final_seed);
  return out;
}

}  // namespace xferlos
