#pragma once

// Synthetic multi-domain ICU cohorts emitted as long-format event tables.
//
// Each stay has a severity score s and a private score p. Shared features follow
// the same latent AR(1) dynamics and severity loading in every domain; private
// features carry p. LoS = 1 + exp(intercept + b_s * s + b_p * p + noise), so it is
// right-skewed and never below one day.

#include "xferlos/dataprep/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace xferlos {

struct SynthFeature {
  std::string name;
  bool shared = true;             // shared features load on severity; private ones on the private score
  double base = 0.0;
  double scale = 1.0;
  double severity_loading = 0.5;
  double latent_loading = 0.5;
  double trend = 0.0;             // per-hour drift multiplied by the driving score
};

struct SynthDomain {
  std::string label;
  int n_stays = 200;
  std::vector<std::string> features;  // names from the pool, recorded in this domain
  double missing_rate = 0.3;
  double severity_mean = 0.0;
  double severity_sd = 1.0;
  double private_effect = 0.0;        // weight of the private score in LoS
  int sparse_features = 0;            // extra features recorded once per stay (fail retention)
};

struct SynthConfig {
  std::uint64_t seed = 1;
  double ar_coefficient = 0.8;
  double ar_noise = 0.3;
  double measurement_noise = 0.05;
  double los_intercept = 1.2;
  double los_severity_coef = 0.45;
  double los_noise_sd = 0.15;
  std::vector<SynthFeature> pool;
  std::vector<SynthDomain> domains;

  const SynthFeature& feature(const std::string& name) const {
    for (const auto& f : pool)
      if (f.name == name) return f;
    throw ValidationError("synthetic feature '" + name + "' is not in the pool");
  }

  void validate() const {
    if (domains.empty()) throw ValidationError("synthetic config has no domains");
    if (!(ar_coefficient > -1.0 && ar_coefficient < 1.0)) throw ValidationError("ar_coefficient must lie in (-1, 1)");
    if (ar_noise < 0.0 || measurement_noise < 0.0 || los_noise_sd < 0.0)
      throw ValidationError("noise scales must be non-negative");
    const auto& src = domains.front();
    for (const auto& d : domains) {
      if (d.n_stays < 40) throw ValidationError("domain '" + d.label + "' needs at least 40 stays");
      if (!(d.missing_rate >= 0.0 && d.missing_rate < 1.0))
        throw ValidationError("missing_rate of '" + d.label + "' must lie in [0, 1)");
      if (d.severity_sd < 0.0) throw ValidationError("severity_sd must be non-negative");
      if (d.features.empty()) throw ValidationError("domain '" + d.label + "' has no features");
      bool shares = false;
      for (const auto& f : d.features) {
        (void)feature(f);
        shares = shares || std::find(src.features.begin(), src.features.end(), f) != src.features.end();
      }
      if (!shares) throw ValidationError("domain '" + d.label + "' shares no feature with the source domain");
    }
  }
};

namespace detail {
template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) it->get_to(field);
}
}  // namespace detail

#define XFERLOS_JSON_TO(field) j[#field] = v.field;
#define XFERLOS_JSON_FROM(field) detail::read_opt(j, #field, v.field);

inline void to_json(nlohmann::json& j, const SynthFeature& v) {
  XFERLOS_JSON_TO(name) XFERLOS_JSON_TO(shared) XFERLOS_JSON_TO(base) XFERLOS_JSON_TO(scale)
  XFERLOS_JSON_TO(severity_loading) XFERLOS_JSON_TO(latent_loading) XFERLOS_JSON_TO(trend)
}
inline void from_json(const nlohmann::json& j, SynthFeature& v) {
  XFERLOS_JSON_FROM(name) XFERLOS_JSON_FROM(shared) XFERLOS_JSON_FROM(base) XFERLOS_JSON_FROM(scale)
  XFERLOS_JSON_FROM(severity_loading) XFERLOS_JSON_FROM(latent_loading) XFERLOS_JSON_FROM(trend)
}
inline void to_json(nlohmann::json& j, const SynthDomain& v) {
  XFERLOS_JSON_TO(label) XFERLOS_JSON_TO(n_stays) XFERLOS_JSON_TO(features) XFERLOS_JSON_TO(missing_rate)
  XFERLOS_JSON_TO(severity_mean) XFERLOS_JSON_TO(severity_sd) XFERLOS_JSON_TO(private_effect)
  XFERLOS_JSON_TO(sparse_features)
}
inline void from_json(const nlohmann::json& j, SynthDomain& v) {
  XFERLOS_JSON_FROM(label) XFERLOS_JSON_FROM(n_stays) XFERLOS_JSON_FROM(features) XFERLOS_JSON_FROM(missing_rate)
  XFERLOS_JSON_FROM(severity_mean) XFERLOS_JSON_FROM(severity_sd) XFERLOS_JSON_FROM(private_effect)
  XFERLOS_JSON_FROM(sparse_features)
}
inline void to_json(nlohmann::json& j, const SynthConfig& v) {
  XFERLOS_JSON_TO(seed) XFERLOS_JSON_TO(ar_coefficient) XFERLOS_JSON_TO(ar_noise) XFERLOS_JSON_TO(measurement_noise)
  XFERLOS_JSON_TO(los_intercept) XFERLOS_JSON_TO(los_severity_coef) XFERLOS_JSON_TO(los_noise_sd)
  XFERLOS_JSON_TO(pool) XFERLOS_JSON_TO(domains)
}
inline void from_json(const nlohmann::json& j, SynthConfig& v) {
  XFERLOS_JSON_FROM(seed) XFERLOS_JSON_FROM(ar_coefficient) XFERLOS_JSON_FROM(ar_noise)
  XFERLOS_JSON_FROM(measurement_noise) XFERLOS_JSON_FROM(los_intercept) XFERLOS_JSON_FROM(los_severity_coef)
  XFERLOS_JSON_FROM(los_noise_sd) XFERLOS_JSON_FROM(pool) XFERLOS_JSON_FROM(domains)
}

#undef XFERLOS_JSON_TO
#undef XFERLOS_JSON_FROM

/// Generator output for one domain: the event table plus the noiseless hourly truth.
struct SynthOutput {
  EventTable events;
  std::vector<std::string> features;  // domain features in config order
  std::vector<Matrix> truth;          // per stay, 24 x features
  std::vector<double> severity;
};

inline std::vector<SynthOutput> synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthOutput> out;
  const int n_latent = 2;
  for (std::size_t d = 0; d < cfg.domains.size(); ++d) {
    const auto& dom = cfg.domains[d];
    Rng rng = make_rng(cfg.seed, "synth-domain", d);
    SynthOutput o;
    o.events.domain = dom.label;
    o.features = dom.features;
    const long n = static_cast<long>(dom.features.size());
    std::vector<const SynthFeature*> defs;
    for (const auto& name : dom.features) defs.push_back(&cfg.feature(name));
    for (int s = 0; s < dom.n_stays; ++s) {
      const std::string id = dom.label + "-" + std::to_string(s);
      const double severity = dom.severity_mean + dom.severity_sd * normal01(rng);
      const double priv = normal01(rng);
      double z[n_latent];
      for (double& v : z) v = cfg.ar_noise * normal01(rng);
      Matrix truth(kTimesteps, n);
      const double innov = cfg.ar_noise * std::sqrt(1.0 - cfg.ar_coefficient * cfg.ar_coefficient);
      for (int t = 0; t < kTimesteps; ++t) {
        if (t > 0)
          for (double& v : z) v = cfg.ar_coefficient * v + innov * normal01(rng);
        for (long j = 0; j < n; ++j) {
          const SynthFeature& f = *defs[static_cast<std::size_t>(j)];
          const double driver = f.shared ? severity : priv;
          const double latent = z[j % n_latent];
          truth(t, j) = f.base + f.scale * (f.severity_loading * driver * (1.0 + f.trend * t) + f.latent_loading * latent);
        }
      }
      const double noise = cfg.los_noise_sd * normal01(rng);
      const double los = kMinLosDays + std::exp(cfg.los_intercept + cfg.los_severity_coef * severity +
                                                dom.private_effect * priv + noise);
      o.events.los_days[id] = los;

      for (int t = 0; t < kTimesteps; ++t) {
        for (long j = 0; j < n; ++j) {
          if (uniform01(rng) < dom.missing_rate) continue;
          const int reps = uniform01(rng) < 0.5 ? 1 : 2;
          for (int k = 0; k < reps; ++k) {
            const double offset = 60.0 * t + uniform(rng, 0.0, 59.999);
            const double v = truth(t, j) + cfg.measurement_noise * normal01(rng);
            o.events.records.push_back({id, offset, dom.features[static_cast<std::size_t>(j)], v});
          }
        }
      }
      for (int k = 0; k < dom.sparse_features; ++k) {
        const double offset = uniform(rng, 0.0, kMinutesPerWindow - 1.0);
        o.events.records.push_back({id, offset, dom.label + " sparse lab " + std::to_string(k), normal01(rng)});
      }
      o.truth.push_back(std::move(truth));
      o.severity.push_back(severity);
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace xferlos
