#pragma once

#include "xferlos/core/dataset.hpp"
#include "xferlos/core/model.hpp"
#include "xferlos/training/adam.hpp"
#include "xferlos/training/loss.hpp"

#include <chrono>
#include <ctime>
#include <limits>
#include <numeric>
#include <optional>

namespace xferlos {

/// Kernel-row split for discriminative fine-tuning. `slow_rows` share `slow_lr` with every
/// non-kernel tensor; `fast_rows` train at `fast_lr`.
struct DiscriminativeGroups {
  std::vector<long> slow_rows;
  std::vector<long> fast_rows;
  double slow_lr = 1e-4;
  double fast_lr = 1e-3;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 6;
  double min_relative_improvement = 0.005;
  std::optional<DiscriminativeGroups> groups;
  /// Carried-over optimizer state (full model transfer); single-group mode only.
  std::optional<AdamState> initial_state;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
    if (patience < 1) throw ValidationError("patience must be >= 1");
    if (groups && initial_state) throw ValidationError("optimizer state carry-over requires single-group training");
  }
};

/// Validation-driven stopping rule. An epoch improves when its loss is below
/// best_so_far * (1 - min_relative_improvement); `patience` consecutive
/// non-improving epochs stop training.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double min_relative_improvement)
      : patience_(patience), min_rel_(min_relative_improvement) {}

  /// Feeds one epoch's validation loss; returns true when training should stop.
  bool update(double val_loss) {
    ++epoch_;
    if (val_loss < best_ * (1.0 - min_rel_) || epoch_ == 1) {
      stale_ = 0;
    } else {
      ++stale_;
    }
    best_ = std::min(best_, val_loss);
    return stale_ >= patience_;
  }

  int epoch() const noexcept { return epoch_; }
  double best() const noexcept { return best_; }

 private:
  int patience_;
  double min_rel_;
  double best_ = std::numeric_limits<double>::infinity();
  int epoch_ = 0;
  int stale_ = 0;
};

/// Epoch count at which the stopping rule fires on `losses`, or losses.size() if it never does.
inline int simulate_early_stopping(const std::vector<double>& losses, int patience, double min_rel) {
  EarlyStopping es(patience, min_rel);
  for (double l : losses)
    if (es.update(l)) return es.epoch();
  return static_cast<int>(losses.size());
}

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int epochs_to_converge = 0;  // epochs actually run
  int best_epoch = 0;          // 1-based epoch of minimum validation loss
  bool early_stopped = false;
  bool stagnated = false;      // early stop inside the first patience window
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;

  double best_val_loss() const { return val_loss.at(static_cast<std::size_t>(best_epoch - 1)); }

  /// Equality ignoring timing.
  bool same_trajectory(const TrainReport& o) const {
    return train_loss == o.train_loss && val_loss == o.val_loss && epochs_to_converge == o.epochs_to_converge &&
           best_epoch == o.best_epoch && early_stopped == o.early_stopped && stagnated == o.stagnated;
  }
};

struct TrainResult {
  LstmModel model;       // weights at the best validation epoch
  AdamState optimizer;   // single-group state at the best epoch (empty in multi-group mode)
  std::vector<ParamGroup> groups;
  TrainReport report;
};

namespace detail {
inline double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}
}  // namespace detail

/// Mini-batch training with per-epoch reshuffling and early stopping on validation MSLE.
inline TrainResult train(LstmModel model, const LabeledSequences& train_set, const LabeledSequences& val_set,
                         const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  model.validate();
  if (train_set.size() == 0) throw ValidationError("training split is empty");
  if (val_set.size() == 0) throw ValidationError("validation split is empty");
  check_dim("training features", static_cast<long>(model.features.size()), train_set.features());
  check_dim("validation features", static_cast<long>(model.features.size()), val_set.features());

  const auto wall0 = std::chrono::steady_clock::now();
  const double cpu0 = detail::thread_cpu_seconds();

  auto params = model.network.parameters();
  AdamState state = cfg.initial_state.value_or(AdamState{});
  if (!state.first_moment.empty())
    check_dim("carried optimizer tensors", static_cast<long>(params.size()),
              static_cast<long>(state.first_moment.size()));
  std::vector<ParamGroup> groups;
  if (cfg.groups)
    groups = split_first_tensor_groups(params.size(), cfg.groups->slow_rows, cfg.groups->fast_rows,
                                       cfg.groups->slow_lr, cfg.groups->fast_lr);

  TrainResult best{model, state, groups, {}};
  TrainReport report;
  EarlyStopping stopper(cfg.patience, cfg.min_relative_improvement);
  double best_val = std::numeric_limits<double>::infinity();

  const long m = train_set.size();
  std::vector<long> order(static_cast<std::size_t>(m));
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0L);
    Rng epoch_rng = make_rng(seed, "epoch", static_cast<std::uint64_t>(epoch));
    shuffle(order, epoch_rng);

    double loss_sum = 0.0;
    for (long start = 0; start < m; start += cfg.batch_size) {
      const long end = std::min(m, start + cfg.batch_size);
      std::vector<long> idx(order.begin() + start, order.begin() + end);
      LabeledSequences batch = train_set.subset(idx);
      ForwardCache cache = forward_cached(batch.inputs, model.network, true, &epoch_rng);
      loss_sum += msle(cache.predictions, batch.targets) * static_cast<double>(end - start);
      NetworkGradients g = backward(cache, model.network, msle_gradient(cache.predictions, batch.targets));
      auto grads = g.tensors();
      if (cfg.groups) {
        multi_group_adam_step(params, grads, groups);
      } else {
        adam_step(params, grads, state, cfg.learning_rate);
      }
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(m));
    const double val = msle(model.predict(val_set.inputs), val_set.targets);
    if (!std::isfinite(val)) throw NumericError("validation loss is not finite at epoch " + std::to_string(epoch));
    report.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      report.best_epoch = epoch;
      best.model = model;
      best.optimizer = state;
      best.groups = groups;
    }
    if (stopper.update(val)) {
      report.early_stopped = true;
      break;
    }
  }
  report.epochs_to_converge = static_cast<int>(report.val_loss.size());
  report.stagnated = report.early_stopped && report.epochs_to_converge <= cfg.patience + 1;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  report.cpu_seconds = detail::thread_cpu_seconds() - cpu0;
  best.report = std::move(report);
  return best;
}

}  // namespace xferlos
