#pragma once

#include "xferlos/core/common.hpp"

#include <map>
#include <set>
#include <span>
#include <vector>

namespace xferlos {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

/// Moments aligned one-to-one with the tensors (or tensor slices) they update.
struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;

  template <typename Tensors>
  static AdamState zeros_like(const Tensors& params) {
    AdamState s;
    for (const auto* p : params) {
      s.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      s.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
    return s;
  }

  friend bool operator==(const AdamState& a, const AdamState& b) {
    if (a.step != b.step || a.first_moment.size() != b.first_moment.size()) return false;
    for (std::size_t i = 0; i < a.first_moment.size(); ++i)
      if (a.first_moment[i] != b.first_moment[i] || a.second_moment[i] != b.second_moment[i]) return false;
    return true;
  }
};

namespace detail {

// Bias-corrected update; `step` is the already-incremented counter.
inline void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step, double lr,
                        const AdamHyper& hp) {
  check_dim("gradient rows", param.rows(), grad.rows());
  check_dim("gradient cols", param.cols(), grad.cols());
  check_dim("moment rows", param.rows(), m.rows());
  check_dim("moment cols", param.cols(), m.cols());
  m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
  v = hp.beta2 * v + (1.0 - hp.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + hp.epsilon);
}

inline Matrix gather_rows(const Matrix& src, const std::vector<long>& rows) {
  Matrix out(static_cast<long>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<long>(i)) = src.row(rows[i]);
  return out;
}

inline void scatter_rows(Matrix& dst, const Matrix& src, const std::vector<long>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) dst.row(rows[i]) = src.row(static_cast<long>(i));
}

}  // namespace detail

/// One Adam step over every tensor in `params`.
inline void adam_step(std::span<Matrix* const> params, std::span<Matrix* const> grads, AdamState& state, double lr,
                      const AdamHyper& hp = {}) {
  check_dim("gradient tensor count", static_cast<long>(params.size()), static_cast<long>(grads.size()));
  if (state.first_moment.empty()) state = AdamState::zeros_like(params);
  check_dim("moment tensor count", static_cast<long>(params.size()), static_cast<long>(state.first_moment.size()));
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i)
    detail::adam_update(*params[i], *grads[i], state.first_moment[i], state.second_moment[i], state.step, lr, hp);
}

/// A tensor, or a subset of its rows when `rows` is non-empty.
struct ParamSlice {
  std::size_t tensor = 0;
  std::vector<long> rows;
};

/// Parameters sharing one learning rate and one moment state.
struct ParamGroup {
  std::vector<ParamSlice> slices;
  double learning_rate = 1e-3;
  AdamState state;  // moments aligned with `slices`
};

/// Rejects groups that touch the same tensor row twice.
inline void check_disjoint(const std::vector<ParamGroup>& groups, std::span<Matrix* const> params) {
  std::map<std::size_t, std::set<long>> rows_taken;
  std::set<std::size_t> whole_taken;
  for (const auto& g : groups) {
    for (const auto& s : g.slices) {
      if (s.tensor >= params.size()) throw ValidationError("parameter group references a missing tensor");
      const bool whole = s.rows.empty();
      if (whole_taken.count(s.tensor) || (whole && rows_taken.count(s.tensor)))
        throw ValidationError("parameter groups overlap on tensor " + std::to_string(s.tensor));
      if (whole) {
        whole_taken.insert(s.tensor);
        continue;
      }
      auto& taken = rows_taken[s.tensor];
      for (long r : s.rows) {
        if (r < 0 || r >= params[s.tensor]->rows()) throw ValidationError("parameter group row out of range");
        if (!taken.insert(r).second)
          throw ValidationError("parameter groups overlap on tensor " + std::to_string(s.tensor) + " row " +
                                std::to_string(r));
      }
    }
  }
}

/// Each group is updated with its own rate and its own moments.
inline void multi_group_adam_step(std::span<Matrix* const> params, std::span<Matrix* const> grads,
                                  std::vector<ParamGroup>& groups, const AdamHyper& hp = {}) {
  check_dim("gradient tensor count", static_cast<long>(params.size()), static_cast<long>(grads.size()));
  check_disjoint(groups, params);
  for (auto& g : groups) {
    if (g.state.first_moment.empty()) {
      for (const auto& s : g.slices) {
        const long rows = s.rows.empty() ? params[s.tensor]->rows() : static_cast<long>(s.rows.size());
        g.state.first_moment.push_back(Matrix::Zero(rows, params[s.tensor]->cols()));
        g.state.second_moment.push_back(Matrix::Zero(rows, params[s.tensor]->cols()));
      }
    }
    ++g.state.step;
    for (std::size_t k = 0; k < g.slices.size(); ++k) {
      const auto& s = g.slices[k];
      if (s.rows.empty()) {
        detail::adam_update(*params[s.tensor], *grads[s.tensor], g.state.first_moment[k], g.state.second_moment[k],
                            g.state.step, g.learning_rate, hp);
      } else {
        Matrix p = detail::gather_rows(*params[s.tensor], s.rows);
        const Matrix gr = detail::gather_rows(*grads[s.tensor], s.rows);
        detail::adam_update(p, gr, g.state.first_moment[k], g.state.second_moment[k], g.state.step,
                            g.learning_rate, hp);
        detail::scatter_rows(*params[s.tensor], p, s.rows);
      }
    }
  }
}

/// Two groups over `n_tensors` tensors: rows `slow_rows` of tensor 0 plus every other tensor at `slow_lr`,
/// rows `fast_rows` of tensor 0 at `fast_lr`. An empty `fast_rows` yields a single group.
inline std::vector<ParamGroup> split_first_tensor_groups(std::size_t n_tensors, std::vector<long> slow_rows,
                                                         std::vector<long> fast_rows, double slow_lr, double fast_lr) {
  std::vector<ParamGroup> groups;
  ParamGroup slow;
  slow.learning_rate = slow_lr;
  if (fast_rows.empty()) {
    slow.slices.push_back({0, {}});
  } else if (!slow_rows.empty()) {
    slow.slices.push_back({0, std::move(slow_rows)});
  }
  for (std::size_t t = 1; t < n_tensors; ++t) slow.slices.push_back({t, {}});
  groups.push_back(std::move(slow));
  if (!fast_rows.empty()) {
    ParamGroup fast;
    fast.learning_rate = fast_lr;
    fast.slices.push_back({0, std::move(fast_rows)});
    groups.push_back(std::move(fast));
  }
  return groups;
}

}  // namespace xferlos
