#pragma once

// Descriptive statistics, Welch's t-test and Tukey's HSD.

#include "xferlos/core/common.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace xferlos {

inline double sample_mean(const std::vector<double>& x) {
  if (x.empty()) throw ValidationError("mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) throw ValidationError("variance needs at least two values");
  const double m = sample_mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

/// Percentile with linear interpolation between order statistics, p in [0, 100].
inline double percentile(std::vector<double> x, double p) {
  if (x.empty()) throw ValidationError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("percentile must lie in [0, 100]");
  std::sort(x.begin(), x.end());
  const double pos = p / 100.0 * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return percentile(std::move(x), 50.0); }

/// "**" for p < 0.001, "*" for p < 0.05, empty otherwise.
inline std::string significance_stars(double p) {
  if (p < 0.001) return "**";
  if (p < 0.05) return "*";
  return "";
}

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  double mean_diff = 0.0;  // mean(a) - mean(b)
  std::string stars;
};

inline WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("Welch test needs at least two values per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = sample_variance(a) / na, vb = sample_variance(b) / nb;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) throw ValidationError("Welch test undefined: both samples have zero variance");
  WelchResult r;
  r.mean_diff = sample_mean(a) - sample_mean(b);
  r.t = r.mean_diff / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  r.stars = significance_stars(r.p);
  return r;
}

/// Pooled-variance two-sample t-test, two-sided.
inline WelchResult pooled_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("t-test needs at least two values per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sp2 = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
  if (!(sp2 > 0.0)) throw ValidationError("t-test undefined: zero pooled variance");
  WelchResult r;
  r.mean_diff = sample_mean(a) - sample_mean(b);
  r.df = na + nb - 2.0;
  r.t = r.mean_diff / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(r.df), std::abs(r.t))));
  r.stars = significance_stars(r.p);
  return r;
}

namespace detail {

// P(range of k standard normals <= w).
inline double normal_range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  static const boost::math::normal_distribution<double> nd;
  auto f = [&](double z) {
    const double d = boost::math::cdf(nd, z) - boost::math::cdf(nd, z - w);
    return boost::math::pdf(nd, z) * std::pow(d, k - 1);
  };
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -9.0, 9.0, 8, 1e-11);
  return std::clamp(static_cast<double>(k) * v, 0.0, 1.0);
}

}  // namespace detail

/// Upper tail P(Q > q) of the studentized range with k groups and df degrees of freedom.
inline double studentized_range_sf(double q, int k, double df) {
  if (k < 2) throw ValidationError("studentized range needs k >= 2");
  if (!(df > 0.0)) throw ValidationError("studentized range needs df > 0");
  if (q <= 0.0) return 1.0;
  if (df > 1e5) return 1.0 - detail::normal_range_cdf(q, k);
  // Density of s = sqrt(chi2_df / df), in log form, on a range holding all but 1e-15 of its mass.
  const double a = 0.5 * df;
  const double log_c = a * std::log(df) - std::lgamma(a) - (a - 1.0) * std::log(2.0);
  auto f = [&](double s) {
    const double log_dens = log_c + (df - 1.0) * std::log(s) - a * s * s;
    return std::exp(log_dens) * (1.0 - detail::normal_range_cdf(q * s, k));
  };
  const double lo = std::sqrt(boost::math::gamma_p_inv(a, 1e-15) / a);
  const double hi = std::sqrt(boost::math::gamma_q_inv(a, 1e-15) / a);
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 8, 1e-10);
  return std::clamp(v, 0.0, 1.0);
}

inline double studentized_range_cdf(double q, int k, double df) { return 1.0 - studentized_range_sf(q, k, df); }

/// q such that P(Q > q) = alpha.
inline double studentized_range_quantile(double alpha, int k, double df) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  auto g = [&](double q) { return studentized_range_sf(q, k, df) - alpha; };
  double lo = 0.0, hi = 4.0;
  while (g(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) throw NumericError("studentized range quantile did not bracket");
  }
  std::uintmax_t iters = 100;
  auto r = boost::math::tools::toms748_solve(g, lo, hi, g(lo), g(hi), boost::math::tools::eps_tolerance<double>(40),
                                             iters);
  return 0.5 * (r.first + r.second);
}

struct TukeyPair {
  std::string group1, group2;
  double mean_diff = 0.0;  // mean(group2) - mean(group1)
  double p_adj = 1.0;
  double lower = 0.0, upper = 0.0;
  bool reject = false;
  std::string stars;
};

struct LabeledSample {
  std::string label;
  std::vector<double> values;
};

/// Tukey-Kramer HSD over every pair (i < j) of groups in input order.
inline std::vector<TukeyPair> tukey_hsd(const std::vector<LabeledSample>& groups, double alpha = 0.05) {
  if (groups.size() < 2) throw ValidationError("Tukey HSD needs at least two groups");
  const int k = static_cast<int>(groups.size());
  double ss_within = 0.0, n_total = 0.0;
  std::vector<double> means;
  for (const auto& g : groups) {
    if (g.values.size() < 2) throw ValidationError("Tukey HSD group '" + g.label + "' needs at least two values");
    const double m = sample_mean(g.values);
    means.push_back(m);
    for (double v : g.values) ss_within += (v - m) * (v - m);
    n_total += static_cast<double>(g.values.size());
  }
  const double df = n_total - k;
  const double mse = ss_within / df;
  if (!(mse > 0.0)) throw ValidationError("Tukey HSD undefined: zero within-group variance");
  const double q_crit = studentized_range_quantile(alpha, k, df);
  std::vector<TukeyPair> out;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      TukeyPair p;
      p.group1 = groups[i].label;
      p.group2 = groups[j].label;
      p.mean_diff = means[j] - means[i];
      const double se = std::sqrt(0.5 * mse *
                                  (1.0 / static_cast<double>(groups[i].values.size()) +
                                   1.0 / static_cast<double>(groups[j].values.size())));
      p.p_adj = studentized_range_sf(std::abs(p.mean_diff) / se, k, df);
      p.lower = p.mean_diff - q_crit * se;
      p.upper = p.mean_diff + q_crit * se;
      p.reject = p.p_adj < alpha;
      p.stars = significance_stars(p.p_adj);
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace xferlos
