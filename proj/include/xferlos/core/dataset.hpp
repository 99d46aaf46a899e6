#pragma once

#include "xferlos/core/lstm.hpp"

namespace xferlos {

/// Inputs (time-major, m rows per step) with one LoS target per stay.
struct LabeledSequences {
  Sequence inputs;
  Vector targets;

  long size() const { return targets.size(); }
  long features() const { return inputs.empty() ? 0 : inputs.front().cols(); }

  LabeledSequences subset(const std::vector<long>& rows) const {
    LabeledSequences out;
    out.inputs = select_rows(inputs, rows);
    out.targets.resize(static_cast<long>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out.targets(static_cast<long>(i)) = targets(rows[i]);
    return out;
  }

  /// Keeps feature columns `cols` in the given order.
  LabeledSequences select_features(const std::vector<long>& cols) const {
    LabeledSequences out;
    out.targets = targets;
    for (const auto& xt : inputs) {
      Matrix sel(xt.rows(), static_cast<long>(cols.size()));
      for (std::size_t j = 0; j < cols.size(); ++j) sel.col(static_cast<long>(j)) = xt.col(cols[j]);
      out.inputs.push_back(std::move(sel));
    }
    return out;
  }
};

}  // namespace xferlos
