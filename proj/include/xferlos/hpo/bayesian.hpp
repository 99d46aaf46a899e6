#pragma once

// Gaussian-process (Matern 5/2 + noise) surrogate with expected-improvement acquisition.

#include "xferlos/hpo/search_space.hpp"

#include <boost/math/distributions/normal.hpp>

#include <functional>
#include <limits>
#include <optional>

namespace xferlos {

struct Trial {
  int index = 0;
  Hyperparameters config;
  std::vector<double> losses;  // one per execution
  double mean_loss = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

struct SearchResult {
  Hyperparameters best;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<Trial> trials;

  /// Best-so-far mean loss after each trial (failed trials carry the previous value).
  std::vector<double> best_so_far() const {
    std::vector<double> out;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& t : trials) {
      if (!t.failed) b = std::min(b, t.mean_loss);
      out.push_back(b);
    }
    return out;
  }
};

/// Validation loss of one execution; the seed is unique per (trial, execution).
using Objective = std::function<double(const Hyperparameters&, std::uint64_t seed)>;

struct BayesOptions {
  int n_trials = 10;
  int n_executions = 2;
  int n_initial = 3;         // random trials before the surrogate is used
  int n_candidates = 2000;   // random points scored by the acquisition
  bool random_only = false;  // pure random sampling fallback
  std::uint64_t seed = 0;
};

namespace detail {

inline double matern52(double r, double length) {
  const double s = std::sqrt(5.0) * r / length;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

/// GP posterior on standardized targets with hyperparameters picked by marginal likelihood on a grid.
class GaussianProcess {
 public:
  GaussianProcess(std::vector<std::vector<double>> x, const std::vector<double>& y) : x_(std::move(x)) {
    const long n = static_cast<long>(y.size());
    y_mean_ = 0.0;
    for (double v : y) y_mean_ += v;
    y_mean_ /= static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - y_mean_) * (v - y_mean_);
    y_sd_ = n > 1 ? std::sqrt(var / static_cast<double>(n)) : 1.0;
    if (!(y_sd_ > 1e-12)) y_sd_ = 1.0;
    Vector ys(n);
    for (long i = 0; i < n; ++i) ys(i) = (y[static_cast<std::size_t>(i)] - y_mean_) / y_sd_;

    double best_lml = -std::numeric_limits<double>::infinity();
    for (double length : {0.05, 0.1, 0.2, 0.35, 0.6, 1.0, 2.0}) {
      for (double noise : {1e-6, 1e-3, 1e-2, 1e-1}) {
        Matrix k = gram(length);
        k.diagonal().array() += noise;
        Eigen::LLT<Matrix> llt(k);
        if (llt.info() != Eigen::Success) continue;
        const Vector alpha = llt.solve(ys);
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        const double lml = -0.5 * ys.dot(alpha) - 0.5 * logdet;
        if (lml > best_lml) {
          best_lml = lml;
          length_ = length;
          llt_ = llt;
          alpha_ = alpha;
        }
      }
    }
    if (!std::isfinite(best_lml)) throw NumericError("GP fit failed");
  }

  /// Posterior mean and standard deviation in the original units.
  std::pair<double, double> predict(const std::vector<double>& p) const {
    const long n = static_cast<long>(x_.size());
    Vector k(n);
    for (long i = 0; i < n; ++i) k(i) = matern52(dist(p, x_[static_cast<std::size_t>(i)]), length_);
    const double mu = k.dot(alpha_);
    const Vector v = llt_.matrixL().solve(k);
    const double var = std::max(1.0 - v.squaredNorm(), 1e-12);
    return {y_mean_ + y_sd_ * mu, y_sd_ * std::sqrt(var)};
  }

 private:
  static double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  Matrix gram(double length) const {
    const long n = static_cast<long>(x_.size());
    Matrix k(n, n);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) k(i, j) = matern52(dist(x_[i], x_[j]), length);
    return k;
  }

  std::vector<std::vector<double>> x_;
  double y_mean_ = 0.0, y_sd_ = 1.0, length_ = 0.2;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
};

inline double expected_improvement(double mu, double sd, double best, double xi = 0.01) {
  static const boost::math::normal_distribution<double> nd;
  const double imp = best - mu - xi;
  const double z = imp / sd;
  return imp * boost::math::cdf(nd, z) + sd * boost::math::pdf(nd, z);
}

// Unit coordinates of the free dimensions only.
inline std::vector<double> free_coords(const SearchSpace& s, const std::array<double, SearchSpace::kDims>& u) {
  std::vector<double> out;
  const auto d = s.dims();
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!d[i]->fixed()) out.push_back(u[i]);
  return out;
}

}  // namespace detail

/// Sequential GP/EI search minimizing the mean loss over executions.
/// A space with no free dimension is evaluated once.
inline SearchResult bayesian_search(const SearchSpace& space, const Objective& objective, const BayesOptions& opt) {
  space.validate();
  if (opt.n_trials < 1) throw ValidationError("n_trials must be >= 1");
  if (opt.n_executions < 1) throw ValidationError("n_executions must be >= 1");
  Rng rng = make_rng(opt.seed, "bayes");
  SearchResult res;
  const int n_trials = space.free_dims() == 0 ? 1 : opt.n_trials;
  for (int t = 0; t < n_trials; ++t) {
    std::array<double, SearchSpace::kDims> u{};
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (const auto& tr : res.trials)
      if (!tr.failed) {
        xs.push_back(detail::free_coords(space, space.encode(tr.config)));
        ys.push_back(tr.mean_loss);
      }
    if (opt.random_only || static_cast<int>(xs.size()) < std::max(1, opt.n_initial)) {
      for (double& x : u) x = uniform01(rng);
    } else {
      detail::GaussianProcess gp(xs, ys);
      const double best = *std::min_element(ys.begin(), ys.end());
      double best_ei = -1.0;
      for (int c = 0; c < opt.n_candidates; ++c) {
        std::array<double, SearchSpace::kDims> cand{};
        for (double& x : cand) x = uniform01(rng);
        // Half of the candidates perturb the incumbent.
        if (c % 2 == 1) {
          const auto inc = space.encode(res.best);
          for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = std::clamp(inc[i] + 0.1 * normal01(rng), 0.0, 1.0);
        }
        const auto [mu, sd] = gp.predict(detail::free_coords(space, space.encode(space.decode(cand))));
        const double ei = detail::expected_improvement(mu, sd, best);
        if (ei > best_ei) {
          best_ei = ei;
          u = cand;
        }
      }
    }
    Trial trial;
    trial.index = t;
    trial.config = space.decode(u);
    try {
      for (int e = 0; e < opt.n_executions; ++e) {
        const double loss = objective(trial.config, derive_seed(derive_seed(opt.seed, "trial", t), "execution", e));
        if (!std::isfinite(loss)) throw NumericError("objective returned a non-finite loss");
        trial.losses.push_back(loss);
      }
      double sum = 0.0;
      for (double l : trial.losses) sum += l;
      trial.mean_loss = sum / static_cast<double>(trial.losses.size());
      if (trial.mean_loss < res.best_loss) {
        res.best_loss = trial.mean_loss;
        res.best = trial.config;
      }
    } catch (const std::exception& e) {
      trial.failed = true;
      trial.error = e.what();
    }
    res.trials.push_back(std::move(trial));
  }
  if (!std::isfinite(res.best_loss)) throw NumericError("every hyperparameter trial failed");
  return res;
}

}  // namespace xferlos
