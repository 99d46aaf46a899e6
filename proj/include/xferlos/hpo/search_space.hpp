#pragma once

// Bounded hyperparameter space on mixed scales, mapped to and from the unit hypercube.

#include "xferlos/core/model.hpp"

#include <array>
#include <cmath>

namespace xferlos {

enum class Scale { linear, log2, log10 };

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
  Scale scale = Scale::linear;

  bool fixed() const { return lo == hi; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Dimension order: num_layers, hidden_units, learning_rate, dropout_rate, batch_size.
struct SearchSpace {
  static constexpr std::size_t kDims = 5;

  Bounds num_layers{1, 2, Scale::linear};
  Bounds hidden_units{8, 512, Scale::log2};
  Bounds learning_rate{1e-4, 1e-2, Scale::log10};
  Bounds dropout_rate{0.1, 0.5, Scale::linear};
  Bounds batch_size{4, 512, Scale::log2};

  std::array<const Bounds*, kDims> dims() const {
    return {&num_layers, &hidden_units, &learning_rate, &dropout_rate, &batch_size};
  }

  void validate() const {
    for (const Bounds* b : dims()) {
      if (!(b->lo <= b->hi)) throw ValidationError("search bound lo must not exceed hi");
      if (b->scale != Scale::linear && !(b->lo > 0.0)) throw ValidationError("log-scaled bound must be positive");
    }
    if (num_layers.lo < 1 || num_layers.hi > 2) throw ValidationError("num_layers must lie in [1, 2]");
    if (hidden_units.lo < 1) throw ValidationError("hidden_units must be >= 1");
    if (batch_size.lo < 1) throw ValidationError("batch_size must be >= 1");
    if (dropout_rate.lo < 0.0 || dropout_rate.hi > 0.5) throw ValidationError("dropout must lie in [0, 0.5]");
    for (const Bounds* b : {&hidden_units, &batch_size})
      if (std::ceil(std::log2(b->lo) - 1e-12) > std::floor(std::log2(b->hi) + 1e-12))
        throw ValidationError("power-of-two range contains no power of two");
  }

  /// Number of dimensions that are not pinned to a single value.
  int free_dims() const {
    int n = 0;
    for (const Bounds* b : dims()) n += b->fixed() ? 0 : 1;
    return n;
  }

  bool contains(const Hyperparameters& hp) const {
    return num_layers.contains(hp.num_layers) && hidden_units.contains(hp.hidden_units) &&
           learning_rate.contains(hp.learning_rate) && dropout_rate.contains(hp.dropout_rate) &&
           batch_size.contains(hp.batch_size);
  }

  /// Maps u in [0,1]^5 to a configuration; integer dimensions are rounded
  /// (powers of two for the log2 dimensions).
  Hyperparameters decode(const std::array<double, kDims>& u) const {
    Hyperparameters hp;
    hp.num_layers = static_cast<int>(std::lround(detail_value(num_layers, u[0])));
    hp.hidden_units = pow2_round(hidden_units, u[1]);
    hp.learning_rate = detail_value(learning_rate, u[2]);
    hp.dropout_rate = detail_value(dropout_rate, u[3]);
    hp.batch_size = pow2_round(batch_size, u[4]);
    return hp;
  }

  /// Inverse of decode on the scaled axes (fixed dimensions map to 0.5).
  std::array<double, kDims> encode(const Hyperparameters& hp) const {
    const std::array<double, kDims> v{static_cast<double>(hp.num_layers), static_cast<double>(hp.hidden_units),
                                      hp.learning_rate, hp.dropout_rate, static_cast<double>(hp.batch_size)};
    std::array<double, kDims> u{};
    const auto d = dims();
    for (std::size_t i = 0; i < kDims; ++i) {
      const Bounds& b = *d[i];
      if (b.fixed()) {
        u[i] = 0.5;
        continue;
      }
      u[i] = std::clamp((to_axis(b, v[i]) - to_axis(b, b.lo)) / (to_axis(b, b.hi) - to_axis(b, b.lo)), 0.0, 1.0);
    }
    return u;
  }

  Hyperparameters sample(Rng& rng) const {
    std::array<double, kDims> u{};
    for (double& x : u) x = uniform01(rng);
    return decode(u);
  }

  static double to_axis(const Bounds& b, double v) {
    switch (b.scale) {
      case Scale::log2: return std::log2(v);
      case Scale::log10: return std::log10(v);
      default: return v;
    }
  }
  static double from_axis(const Bounds& b, double a) {
    switch (b.scale) {
      case Scale::log2: return std::exp2(a);
      case Scale::log10: return std::pow(10.0, a);
      default: return a;
    }
  }

 private:
  static double detail_value(const Bounds& b, double u) {
    if (b.fixed()) return b.lo;
    const double lo = to_axis(b, b.lo), hi = to_axis(b, b.hi);
    return std::clamp(from_axis(b, lo + std::clamp(u, 0.0, 1.0) * (hi - lo)), b.lo, b.hi);
  }
  static int pow2_round(const Bounds& b, double u) {
    const double v = detail_value(b, u);
    const double e_lo = std::ceil(std::log2(b.lo) - 1e-12), e_hi = std::floor(std::log2(b.hi) + 1e-12);
    const double e = std::clamp(std::round(std::log2(v)), e_lo, e_hi);
    return static_cast<int>(std::lround(std::exp2(e)));
  }
};

}  // namespace xferlos
