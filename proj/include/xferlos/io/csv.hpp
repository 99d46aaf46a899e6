#pragma once

// Minimal RFC 4180 style CSV plus the event and target table formats.

#include "xferlos/dataprep/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace xferlos {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ValidationError("unterminated quote in CSV line");
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

namespace detail {

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": '" + s + "' is not a number");
  }
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw ValidationError("'" + path + "' must start with header " + want);
  }
  std::vector<std::vector<std::string>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                            " fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace detail

/// Reads `stay_id,offset_min,feature,value` events and `stay_id,los_days` targets.
inline EventTable read_event_table(const std::string& events_path, const std::string& targets_path,
                                   const std::string& domain) {
  EventTable t;
  t.domain = domain;
  for (const auto& f : detail::read_csv(events_path, {"stay_id", "offset_min", "feature", "value"}))
    t.records.push_back({f[0], detail::parse_double(f[1], events_path), f[2], detail::parse_double(f[3], events_path)});
  for (const auto& f : detail::read_csv(targets_path, {"stay_id", "los_days"})) {
    if (!t.los_days.emplace(f[0], detail::parse_double(f[1], targets_path)).second)
      throw ValidationError(targets_path + ": duplicate stay '" + f[0] + "'");
  }
  return t;
}

inline void write_event_table(const EventTable& t, const std::string& events_path, const std::string& targets_path) {
  std::ofstream ev(events_path), tg(targets_path);
  if (!ev || !tg) throw ValidationError("cannot write event table to '" + events_path + "'");
  ev << "stay_id,offset_min,feature,value\n";
  for (const auto& r : t.records)
    ev << csv_field(r.stay_id) << ',' << format_double(r.offset_min) << ',' << csv_field(r.feature) << ','
       << format_double(r.value) << '\n';
  tg << "stay_id,los_days\n";
  for (const auto& [id, los] : t.los_days) tg << csv_field(id) << ',' << format_double(los) << '\n';
}

}  // namespace xferlos
