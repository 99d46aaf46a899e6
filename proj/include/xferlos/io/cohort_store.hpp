#pragma once

// Prepared cohort on disk: manifest.json plus cohort.bin (float64 little endian, per stay
// 24 x n imputed values followed by 24 x n indicators; NaN marks never-observed inputs).

#include "xferlos/dataprep/pipeline.hpp"
#include "xferlos/io/base64.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace xferlos {

inline constexpr int kCohortFormatVersion = 1;

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::vector<std::uint8_t> cohort_bytes(const Cohort& c) {
  std::vector<std::uint8_t> out;
  for (const auto& s : c.stays) {
    auto v = doubles_to_bytes(s.values.data(), static_cast<std::size_t>(s.values.size()));
    auto i = doubles_to_bytes(s.indicators.data(), static_cast<std::size_t>(s.indicators.size()));
    out.insert(out.end(), v.begin(), v.end());
    out.insert(out.end(), i.begin(), i.end());
  }
  return out;
}

/// Content hash of a cohort (inputs, stays, targets and tensor bytes).
inline std::string cohort_hash(const Cohort& c) {
  std::uint64_t h = detail::fnv1a(c.domain);
  for (const auto& f : c.inputs) h = detail::splitmix64(h ^ detail::fnv1a(f));
  for (const auto& s : c.stay_ids) h = detail::splitmix64(h ^ detail::fnv1a(s));
  const auto t = doubles_to_bytes(c.targets.data(), static_cast<std::size_t>(c.targets.size()));
  const auto b = cohort_bytes(c);
  h = detail::splitmix64(h ^ detail::fnv1a(std::string_view(reinterpret_cast<const char*>(t.data()), t.size())));
  h = detail::splitmix64(h ^ detail::fnv1a(std::string_view(reinterpret_cast<const char*>(b.data()), b.size())));
  return hex64(h);
}

inline void save_cohort(const Cohort& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto bytes = cohort_bytes(c);
  std::ofstream bin(dir / "cohort.bin", std::ios::binary);
  if (!bin) throw ValidationError("cannot write '" + (dir / "cohort.bin").string() + "'");
  bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  nlohmann::json m;
  m["format"] = "xferlos-cohort";
  m["version"] = kCohortFormatVersion;
  m["domain"] = c.domain;
  m["inputs"] = c.inputs;
  m["augmented_width"] = 2 * c.inputs.size() + 1;
  m["stay_ids"] = c.stay_ids;
  m["los_days"] = std::vector<double>(c.targets.data(), c.targets.data() + c.targets.size());
  m["tensor_file"] = "cohort.bin";
  m["hash"] = cohort_hash(c);
  std::ofstream(dir / "manifest.json") << m.dump(1) << "\n";
}

inline Cohort load_cohort(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ValidationError("no manifest.json in '" + dir.string() + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed cohort manifest: " + std::string(e.what()));
  }
  if (m.value("format", "") != "xferlos-cohort" || m.value("version", 0) != kCohortFormatVersion)
    throw ValidationError("'" + dir.string() + "' is not a version " + std::to_string(kCohortFormatVersion) + " cohort");
  Cohort c;
  c.domain = m.at("domain").get<std::string>();
  c.inputs = m.at("inputs").get<std::vector<std::string>>();
  c.stay_ids = m.at("stay_ids").get<std::vector<std::string>>();
  const auto los = m.at("los_days").get<std::vector<double>>();
  check_dim("targets", static_cast<long>(c.stay_ids.size()), static_cast<long>(los.size()));
  c.targets = Eigen::Map<const Vector>(los.data(), static_cast<long>(los.size()));
  std::ifstream bin(dir / m.at("tensor_file").get<std::string>(), std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const long n = static_cast<long>(c.inputs.size());
  const std::size_t per_stay = 2 * kTimesteps * static_cast<std::size_t>(n) * 8;
  check_dim("cohort bytes", static_cast<long>(per_stay * c.stay_ids.size()), static_cast<long>(bytes.size()));
  const auto all = bytes_to_doubles(bytes);
  const long block = kTimesteps * n;
  for (std::size_t s = 0; s < c.stay_ids.size(); ++s) {
    Imputed im{Matrix(kTimesteps, n), Matrix(kTimesteps, n)};
    const double* p = all.data() + 2 * block * static_cast<long>(s);
    std::copy(p, p + block, im.values.data());
    std::copy(p + block, p + 2 * block, im.indicators.data());
    c.stays.push_back(std::move(im));
  }
  if (m.contains("hash") && m["hash"].get<std::string>() != cohort_hash(c))
    throw ValidationError("cohort in '" + dir.string() + "' does not match its manifest hash");
  return c;
}

}  // namespace xferlos
