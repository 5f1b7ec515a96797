#pragma once

#include "sea/eval.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sea {

inline constexpr int kReportVersion = 1;

struct Condition {
  std::string name;
  Evaluation evaluation;
};

struct Comparison {
  std::string a;
  std::string b;
  WelchResult welch;
};

struct Report {
  std::string config_hash;
  std::vector<Condition> conditions;
  std::vector<Comparison> comparisons;
  std::optional<MetricsReport> classification;
};

/// Welch tests of the first condition against each of the others.
std::vector<Comparison> compare_against_first(const std::vector<Condition>& conditions);

/// The report.json document; `generated_at` is its only time-dependent field.
nlohmann::json report_json(const Report& r, const std::string& generated_at);

/// Every rollout (scores, gates, phases, actions) so the report can be re-rendered.
nlohmann::json raw_results_json(const Report& r);
Report report_from_raw_results(const nlohmann::json& j);

/// Writes report.json, scores.csv, gate_trace.csv and raw_results.json into `dir`.
void emit_report(const Report& r, const std::filesystem::path& dir);

/// UTC time as ISO 8601.
std::string utc_timestamp();

}  // namespace sea
