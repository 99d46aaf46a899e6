#pragma once

// Weight transfer between domains whose input spaces differ.
//
// Kernel rows are matched by canonical feature name. Rows of coinciding features
// are copied from the source kernel; rows of target-only features keep a fresh
// Glorot-uniform draw. Recurrent kernel, bias (and by default the dense head) are
// copied verbatim, giving the target composition [W_x(T), W_h(S), b(S)].

#include "xferlos/core/model.hpp"
#include "xferlos/training/adam.hpp"
#include "xferlos/training/trainer.hpp"

#include <string>
#include <utility>
#include <vector>

namespace xferlos {

/// How source and target input spaces relate.
enum class SpaceRelation {
  subset_S_of_T,         // every source feature is in the target, target has more
  partial_overlap,       // each side has features the other lacks
  T_subset_or_equal_S,   // every target feature is in the source: total transfer
};

inline std::string to_string(SpaceRelation r) {
  switch (r) {
    case SpaceRelation::subset_S_of_T: return "subset_S_of_T";
    case SpaceRelation::partial_overlap: return "partial_overlap";
    case SpaceRelation::T_subset_or_equal_S: return "T_subset_or_equal_S";
  }
  return "unknown";
}

struct CoincidingPair {
  std::size_t source_index;
  std::size_t target_index;
  friend bool operator==(const CoincidingPair&, const CoincidingPair&) = default;
};

struct TransferPlan {
  std::vector<CoincidingPair> coinciding;   // ordered by target index
  std::vector<std::size_t> non_coinciding;  // target indices absent from the source
  SpaceRelation relation = SpaceRelation::partial_overlap;
  std::size_t source_size = 0;
  std::size_t target_size = 0;

  std::size_t n_coinciding() const { return coinciding.size(); }
  std::size_t n_non_coinciding() const { return non_coinciding.size(); }
};

/// Raised when full model transfer is not applicable; lists the target features blocking it.
class TransferPreconditionError : public ValidationError {
 public:
  explicit TransferPreconditionError(std::vector<std::string> blocking)
      : ValidationError(make_message(blocking)), blocking_(std::move(blocking)) {}
  const std::vector<std::string>& blocking_features() const noexcept { return blocking_; }

 private:
  static std::string make_message(const std::vector<std::string>& b) {
    std::string msg = "full model transfer requires the target space to be a subset of the source; " +
                      std::to_string(b.size()) + " blocking feature(s):";
    for (const auto& f : b) msg += " " + f;
    return msg;
  }
  std::vector<std::string> blocking_;
};

inline TransferPlan compute_feature_alignment(const FeatureSpace& source, const FeatureSpace& target) {
  TransferPlan plan;
  plan.source_size = source.size();
  plan.target_size = target.size();
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (auto s = source.index_of(target.name(t))) {
      plan.coinciding.push_back({*s, t});
    } else {
      plan.non_coinciding.push_back(t);
    }
  }
  if (plan.non_coinciding.empty()) {
    plan.relation = SpaceRelation::T_subset_or_equal_S;
  } else if (plan.coinciding.size() == source.size()) {
    plan.relation = SpaceRelation::subset_S_of_T;
  } else {
    plan.relation = SpaceRelation::partial_overlap;
  }
  return plan;
}

/// Every hyperparameter comes from the source except the batch size.
inline Hyperparameters transfer_hyperparameters(const Hyperparameters& source, int target_batch_size) {
  if (target_batch_size < 1) throw ValidationError("target batch size must be >= 1");
  Hyperparameters hp = source;
  hp.batch_size = target_batch_size;
  return hp;
}

namespace detail {
inline void check_plan(const TransferPlan& plan, const FeatureSpace& source, const FeatureSpace& target) {
  if (plan.source_size != source.size() || plan.target_size != target.size())
    throw ValidationError("transfer plan was computed for different feature spaces");
  std::vector<int> seen(target.size(), 0);
  for (const auto& p : plan.coinciding) {
    if (p.source_index >= source.size() || p.target_index >= target.size())
      throw ValidationError("transfer plan index out of range");
    if (source.name(p.source_index) != target.name(p.target_index))
      throw ValidationError("transfer plan pairs '" + source.name(p.source_index) + "' with '" +
                            target.name(p.target_index) + "'");
    ++seen[p.target_index];
  }
  for (std::size_t t : plan.non_coinciding) {
    if (t >= target.size()) throw ValidationError("transfer plan index out of range");
    ++seen[t];
  }
  for (std::size_t t = 0; t < seen.size(); ++t)
    if (seen[t] != 1) throw ValidationError("transfer plan must cover target feature '" + target.name(t) + "' once");
}
}  // namespace detail

struct TransferOptions {
  int target_batch_size = 32;
  bool fresh_head = false;  // re-initialize the dense head instead of copying it
};

/// Partial (or total) weight transfer from a trained source model.
inline LstmModel transfer_weights(const LstmModel& source, const FeatureSpace& target_space, const TransferPlan& plan,
                                  Rng& rng, const TransferOptions& opts = {}) {
  source.validate();
  detail::check_plan(plan, source.features, target_space);

  LstmModel target;
  target.features = target_space;
  target.hyper = transfer_hyperparameters(source.hyper, opts.target_batch_size);
  target.network = source.network;

  const long four_h = source.network.layers[0].kernel.cols();
  Matrix kernel = glorot_init(static_cast<long>(target_space.size()), four_h, rng);
  const Matrix& src = source.network.layers[0].kernel;
  for (const auto& p : plan.coinciding)
    kernel.row(static_cast<long>(p.target_index)) = src.row(static_cast<long>(p.source_index));
  target.network.layers[0].kernel = std::move(kernel);
  if (opts.fresh_head) {
    target.network.dense.weight = glorot_init(source.network.units(), 1, rng);
    target.network.dense.bias.setZero();
  }
  target.validate();
  return target;
}

inline LstmModel transfer_weights(const LstmModel& source, const FeatureSpace& target_space, Rng& rng,
                                  const TransferOptions& opts = {}) {
  return transfer_weights(source, target_space, compute_feature_alignment(source.features, target_space), rng, opts);
}

/// Target columns that survive dropping target-only features, in target order.
inline std::vector<long> coinciding_target_columns(const TransferPlan& plan) {
  std::vector<long> cols;
  cols.reserve(plan.coinciding.size());
  for (const auto& p : plan.coinciding) cols.push_back(static_cast<long>(p.target_index));
  return cols;
}

/// Target space restricted to the features the source also has.
inline FeatureSpace drop_non_coinciding(const FeatureSpace& target, const TransferPlan& plan) {
  std::vector<std::string> names;
  for (const auto& p : plan.coinciding) names.push_back(target.name(p.target_index));
  return FeatureSpace(std::move(names), target.domain());
}

struct FullTransfer {
  LstmModel model;
  AdamState optimizer;
};

/// Source model and optimizer state restricted to the target's rows; training continues from there.
/// Requires every target feature to exist in the source.
inline FullTransfer full_model_transfer(const LstmModel& source, const AdamState& source_optimizer,
                                        const FeatureSpace& target_space, int target_batch_size) {
  source.validate();
  const TransferPlan plan = compute_feature_alignment(source.features, target_space);
  if (!plan.non_coinciding.empty()) {
    std::vector<std::string> blocking;
    for (std::size_t t : plan.non_coinciding) blocking.push_back(target_space.name(t));
    throw TransferPreconditionError(std::move(blocking));
  }
  std::vector<long> rows;
  for (const auto& p : plan.coinciding) rows.push_back(static_cast<long>(p.source_index));

  FullTransfer out;
  out.model.features = target_space;
  out.model.hyper = transfer_hyperparameters(source.hyper, target_batch_size);
  out.model.network = source.network;
  out.model.network.layers[0].kernel = detail::gather_rows(source.network.layers[0].kernel, rows);

  out.optimizer = source_optimizer;
  if (!out.optimizer.first_moment.empty()) {
    check_dim("optimizer tensor count", static_cast<long>(source.network.parameters().size()),
              static_cast<long>(out.optimizer.first_moment.size()));
    out.optimizer.first_moment[0] = detail::gather_rows(source_optimizer.first_moment[0], rows);
    out.optimizer.second_moment[0] = detail::gather_rows(source_optimizer.second_moment[0], rows);
  }
  out.model.validate();
  return out;
}

/// Per-group learning rates: target-only rows keep lr_S, coinciding rows (and all
/// non-kernel tensors) get alpha * lr_S.
inline DiscriminativeGroups assign_learning_rates(const TransferPlan& plan, double lr_source, double alpha) {
  if (!(lr_source > 0.0)) throw ValidationError("source learning rate must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  DiscriminativeGroups g;
  for (const auto& p : plan.coinciding) g.slow_rows.push_back(static_cast<long>(p.target_index));
  for (std::size_t t : plan.non_coinciding) g.fast_rows.push_back(static_cast<long>(t));
  g.slow_lr = alpha * lr_source;
  g.fast_lr = lr_source;
  return g;
}

}  // namespace xferlos
