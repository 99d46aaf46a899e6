#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace xferlos {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

/// Number of hourly steps in every stay sequence.
inline constexpr int kTimesteps = 24;

/// Input validation failure. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimension mismatch; `axis()` names the offending axis.
class ShapeError : public ValidationError {
 public:
  ShapeError(std::string axis, long expected, long actual)
      : ValidationError("shape mismatch on axis '" + axis + "': expected " + std::to_string(expected) +
                        ", got " + std::to_string(actual)),
        axis_(std::move(axis)),
        expected_(expected),
        actual_(actual) {}

  const std::string& axis() const noexcept { return axis_; }
  long expected() const noexcept { return expected_; }
  long actual() const noexcept { return actual_; }

 private:
  std::string axis_;
  long expected_;
  long actual_;
};

/// Non-finite values encountered during evaluation. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check_dim(std::string_view axis, long expected, long actual) {
  if (expected != actual) throw ShapeError(std::string(axis), expected, actual);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Named seed derivation: every random stream is keyed by (seed, component, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view component, std::uint64_t index = 0) {
  return detail::splitmix64(detail::splitmix64(seed ^ detail::fnv1a(component)) + index);
}

inline Rng make_rng(std::uint64_t seed, std::string_view component, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, component, index));
}

/// Uniform draw on [0, 1) with a fixed bit recipe (independent of the standard library's distributions).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via Box-Muller on `uniform01`.
inline double normal01(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Unbiased index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Worker count from XFER_THREADS (default: hardware concurrency), at least one.
inline int thread_cap() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("XFER_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<int>(v);
  }
  return std::max(1, n);
}

}  // namespace xferlos
