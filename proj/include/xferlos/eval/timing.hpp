#pragma once

#include <map>
#include <string>
#include <vector>

namespace xferlos {

/// One timed run. kind is a short experiment-kind code such as "OP", "WT", "FT" or "DL".
struct TimingEntry {
  std::string experiment;
  std::string kind;
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;
};

struct TimingRow {
  std::string experiment;
  std::string kind;
  int runs = 0;
  double wall_hours = 0.0;
  double cpu_hours = 0.0;
};

/// Totals per (experiment, kind), sorted by experiment then kind.
inline std::vector<TimingRow> cpu_time_report(const std::vector<TimingEntry>& logs) {
  std::map<std::pair<std::string, std::string>, TimingRow> acc;
  for (const auto& e : logs) {
    TimingRow& r = acc[{e.experiment, e.kind}];
    r.experiment = e.experiment;
    r.kind = e.kind;
    r.runs += 1;
    r.wall_hours += e.wall_seconds / 3600.0;
    r.cpu_hours += e.cpu_seconds / 3600.0;
  }
  std::vector<TimingRow> out;
  for (auto& [key, row] : acc) out.push_back(row);
  return out;
}

}  // namespace xferlos
