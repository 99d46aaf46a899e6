#pragma once

#include "xferlos/core/common.hpp"

#include <cmath>

namespace xferlos {

/// Test-set errors in days: MAE, MAPE (as a ratio) and MSE.
struct MetricReport {
  double mae = 0.0;
  double mape = 0.0;
  double mse = 0.0;
  long n = 0;
};

inline MetricReport compute_metrics(const Vector& pred, const Vector& target) {
  check_dim("stays", target.size(), pred.size());
  if (target.size() == 0) throw ValidationError("metrics need at least one stay");
  if (!pred.allFinite() || !target.allFinite()) throw ValidationError("metrics need finite values");
  if ((target.array() <= 0.0).any()) throw ValidationError("MAPE undefined: target contains a non-positive value");
  const Eigen::ArrayXd err = (pred - target).array();
  MetricReport r;
  r.n = target.size();
  r.mae = err.abs().mean();
  r.mape = (err.abs() / target.array()).mean();
  r.mse = err.square().mean();
  return r;
}

}  // namespace xferlos
