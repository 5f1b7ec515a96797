#include "sea/report.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace sea {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

json summary_json(const ScoreSummary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"std", s.std}, {"std_undefined", s.std_undefined},
          {"scores", s.scores}};
}

json metrics_json(const MetricsReport& m) {
  return {{"accuracy", m.accuracy},         {"f1_all_actions", m.f1_all},
          {"f1_action_vs_no_action", m.f1_binary}, {"per_class_f1", m.per_class_f1},
          {"confusion", m.confusion},       {"gaze_usage", m.gaze_usage}};
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  m.accuracy = j.at("accuracy").get<double>();
  m.f1_all = j.at("f1_all_actions").get<double>();
  m.f1_binary = j.at("f1_action_vs_no_action").get<double>();
  m.per_class_f1 = j.at("per_class_f1").get<std::vector<double>>();
  m.confusion = j.at("confusion").get<std::vector<std::vector<long>>>();
  m.gaze_usage = j.at("gaze_usage").get<double>();
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<Comparison> compare_against_first(const std::vector<Condition>& conditions) {
  std::vector<Comparison> out;
  for (std::size_t i = 1; i < conditions.size(); ++i) {
    if (conditions[0].evaluation.summary.n < 2 || conditions[i].evaluation.summary.n < 2) continue;
    out.push_back({conditions[0].name, conditions[i].name,
                   welch_t_test(conditions[0].evaluation.summary, conditions[i].evaluation.summary)});
  }
  return out;
}

json report_json(const Report& r, const std::string& generated_at) {
  json j;
  j["version"] = kReportVersion;
  j["config_hash"] = r.config_hash;
  j["conditions"] = json::array();
  for (const auto& c : r.conditions) {
    const auto& e = c.evaluation;
    j["conditions"].push_back({{"name", c.name},
                               {"gate_policy", gate_policy_name(e.policy)},
                               {"summary", summary_json(e.summary)},
                               {"gaze_usage", e.gaze_usage},
                               {"gate_rate_descending", gate_rate_in_phase(e.rollouts, 1)},
                               {"gate_rate_ascending", gate_rate_in_phase(e.rollouts, 0)}});
  }
  j["comparisons"] = json::array();
  for (const auto& c : r.comparisons)
    j["comparisons"].push_back(
        {{"a", c.a}, {"b", c.b}, {"t", c.welch.t}, {"df", c.welch.df}, {"p", c.welch.p}});
  j["classification"] = r.classification ? metrics_json(*r.classification) : json(nullptr);
  j["generated_at"] = generated_at;
  return j;
}

json raw_results_json(const Report& r) {
  json j;
  j["version"] = kReportVersion;
  j["config_hash"] = r.config_hash;
  j["conditions"] = json::array();
  for (const auto& c : r.conditions) {
    json rollouts = json::array();
    for (const auto& ro : c.evaluation.rollouts)
      rollouts.push_back({{"seed", ro.seed},
                          {"score", ro.score},
                          {"actions", ro.actions},
                          {"gates", ro.gates},
                          {"phase", ro.phase}});
    j["conditions"].push_back(
        {{"name", c.name}, {"gate_policy", gate_policy_name(c.evaluation.policy)}, {"rollouts", rollouts}});
  }
  j["classification"] = r.classification ? metrics_json(*r.classification) : json(nullptr);
  return j;
}

Report report_from_raw_results(const json& j) {
  try {
    if (j.at("version").get<int>() != kReportVersion)
      throw std::runtime_error("unsupported raw results version");
    Report r;
    r.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& c : j.at("conditions")) {
      Condition cond;
      cond.name = c.at("name").get<std::string>();
      cond.evaluation.policy = parse_gate_policy(c.at("gate_policy").get<std::string>());
      std::vector<double> scores;
      for (const auto& ro : c.at("rollouts")) {
        RolloutResult x;
        x.seed = ro.at("seed").get<std::uint64_t>();
        x.score = ro.at("score").get<double>();
        x.actions = ro.at("actions").get<std::vector<int>>();
        x.gates = ro.at("gates").get<std::vector<int>>();
        x.phase = ro.at("phase").get<std::vector<int>>();
        if (x.gates.size() != x.actions.size() || x.phase.size() != x.actions.size())
          throw std::runtime_error("rollout trace lengths differ");
        scores.push_back(x.score);
        cond.evaluation.rollouts.push_back(std::move(x));
      }
      cond.evaluation.summary = summarize(scores);
      cond.evaluation.gaze_usage = gaze_usage(cond.evaluation.rollouts);
      r.conditions.push_back(std::move(cond));
    }
    if (!j.at("classification").is_null()) r.classification = metrics_from_json(j.at("classification"));
    r.comparisons = compare_against_first(r.conditions);
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed raw results: ") + e.what());
  }
}

void emit_report(const Report& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", report_json(r, utc_timestamp()).dump(2) + "\n");
  write_text(dir / "raw_results.json", raw_results_json(r).dump() + "\n");
  std::string scores = "condition,gate_policy,seed,score\n";
  std::string trace = "condition,seed,frame,gate,phase\n";
  for (const auto& c : r.conditions) {
    const std::string name = csv_field(c.name);
    const std::string policy(gate_policy_name(c.evaluation.policy));
    for (const auto& ro : c.evaluation.rollouts) {
      scores += name + "," + policy + "," + std::to_string(ro.seed) + "," + json(ro.score).dump() + "\n";
      for (std::size_t i = 0; i < ro.gates.size(); ++i)
        trace += name + "," + std::to_string(ro.seed) + "," + std::to_string(i) + "," +
                 std::to_string(ro.gates[i]) + "," + std::to_string(ro.phase[i]) + "\n";
    }
  }
  write_text(dir / "scores.csv", scores);
  write_text(dir / "gate_trace.csv", trace);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace sea
