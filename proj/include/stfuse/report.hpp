#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stfuse/evaluation.hpp"
#include "stfuse/types.hpp"

namespace stfuse {

/// Top-k accuracy out of an EvalReport; k past the stored curve saturates.
inline double rank_at(const EvalReport& report, std::size_t k) {
  if (report.cmc.empty()) return 0.0;
  if (k < 1) k = 1;
  return report.cmc[std::min(k, report.cmc.size()) - 1];
}

/// Machine-readable report. nlohmann::json keeps object keys sorted, so the
/// serialized form is deterministic for identical inputs.
inline nlohmann::json report_to_json(const EvalReport& report, FusionMode mode,
                                     std::size_t queries_total) {
  return {{"mode", fusion_mode_name(mode)},
          {"map", report.map},
          {"cmc", report.cmc},
          {"rank1", rank_at(report, 1)},
          {"rank5", rank_at(report, 5)},
          {"rank10", rank_at(report, 10)},
          {"queries_evaluated", report.retained_queries.size()},
          {"queries_total", queries_total},
          {"per_query_ap", report.per_query_ap},
          {"retained_queries", report.retained_queries}};
}

inline std::string json_to_string(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Human-readable table with R-1/R-5/R-10/mAP columns, values in percent.
inline std::string format_report_table(
    const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::string out = "mode            R-1      R-5      R-10     mAP\n";
  char line[128];
  for (const auto& [name, report] : rows) {
    std::snprintf(line, sizeof(line), "%-14s %8.2f %8.2f %8.2f %8.2f\n", name.c_str(),
                  100.0 * rank_at(report, 1), 100.0 * rank_at(report, 5),
                  100.0 * rank_at(report, 10), 100.0 * report.map);
    out += line;
  }
  return out;
}

}  // namespace stfuse
