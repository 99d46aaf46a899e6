#pragma once

#include "xferlos/core/common.hpp"

namespace xferlos {

namespace detail {
inline void check_msle_inputs(const Vector& pred, const Vector& target) {
  check_dim("prediction length", target.size(), pred.size());
  if (pred.size() == 0) throw ValidationError("msle of an empty batch");
  if ((pred.array() < 0.0).any()) throw ValidationError("msle requires non-negative predictions");
  if ((target.array() < 0.0).any()) throw ValidationError("msle requires non-negative targets");
}
}  // namespace detail

/// Mean squared logarithmic error (natural log).
inline double msle(const Vector& pred, const Vector& target) {
  detail::check_msle_inputs(pred, target);
  const Eigen::ArrayXd d = target.array().log1p() - pred.array().log1p();
  return d.square().mean();
}

/// d msle / d pred.
inline Vector msle_gradient(const Vector& pred, const Vector& target) {
  detail::check_msle_inputs(pred, target);
  const double m = static_cast<double>(pred.size());
  const Eigen::ArrayXd d = target.array().log1p() - pred.array().log1p();
  return (-2.0 / m * d / (1.0 + pred.array())).matrix();
}

}  // namespace xferlos
