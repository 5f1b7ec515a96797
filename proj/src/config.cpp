#include "sea/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace sea {

using nlohmann::json;

void Config::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(batch_size >= 2, "batch_size must be >= 2 (batch norm needs two samples)");
  require(gaze_epochs >= 1, "gaze_epochs must be >= 1");
  require(action_epochs >= 1, "action_epochs must be >= 1");
  require(lr >= 0.0, "lr must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
  require(keep_fraction > 0.0 && keep_fraction <= 1.0, "keep_fraction must lie in (0, 1]");
  require(sigma_px >= 0.0, "sigma_px must be >= 0");
  require(action_count >= 2, "action_count must be >= 2");
  require(random_gate_p >= 0.0 && random_gate_p <= 1.0, "random_gate_p must lie in [0, 1]");
  require(threads >= 1, "threads must be >= 1");
  require(n_trials >= 2, "n_trials must be >= 2");
  require(train_trials >= 1 && val_trials >= 1, "train_trials and val_trials must be >= 1");
  require(train_trials + val_trials <= n_trials, "train_trials + val_trials exceeds n_trials");
  require(steps_per_trial >= 1, "steps_per_trial must be >= 1");
  require(rollouts >= 1, "rollouts must be >= 1");
  env().validate();
}

double Config::gaze_sigma() const {
  return sigma_px > 0.0 ? sigma_px
                        : visual_degree_to_pixels(atari_head_geometry(), double(kFrameSize));
}

minicatch::EnvConfig Config::env() const {
  minicatch::EnvConfig e;
  e.seed = seed;
  e.max_steps = max_steps;
  e.ball_speed = ball_speed;
  e.paddle_speed = paddle_speed;
  e.paddle_half_width = paddle_half_width;
  e.gaze_noise_px = gaze_noise_px;
  e.distractor = distractor;
  return e;
}

minicatch::DatasetConfig Config::dataset() const {
  minicatch::DatasetConfig d;
  d.env = env();
  d.n_trials = n_trials;
  d.steps_per_trial = steps_per_trial;
  return d;
}

namespace {

/// Field table: name -> (read into config from json, write to json).
struct Field {
  std::function<void(Config&, const json&)> read;
  std::function<json(const Config&)> write;
  bool numeric;
};

template <typename T>
Field member(T Config::*m) {
  return {[m](Config& c, const json& v) {
            if constexpr (std::is_same_v<T, bool>) {
              if (!v.is_boolean()) throw ConfigError("expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
              if (!v.is_string()) throw ConfigError("expected a string");
            } else if constexpr (std::is_integral_v<T>) {
              if (!v.is_number_integer()) throw ConfigError("expected an integer");
              if constexpr (std::is_unsigned_v<T>)
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
                  throw ConfigError("expected a non-negative integer");
            } else {
              if (!v.is_number()) throw ConfigError("expected a number");
            }
            c.*m = v.get<T>();
          },
          [m](const Config& c) { return json(c.*m); }, !std::is_same_v<T, std::string>};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["seed"] = member(&Config::seed);
    t["batch_size"] = member(&Config::batch_size);
    t["gaze_epochs"] = member(&Config::gaze_epochs);
    t["action_epochs"] = member(&Config::action_epochs);
    t["lr"] = member(&Config::lr);
    t["beta1"] = member(&Config::beta1);
    t["beta2"] = member(&Config::beta2);
    t["gate_policy"] = {[](Config& c, const json& v) {
                          if (!v.is_string()) throw ConfigError("expected a string");
                          try {
                            c.gate_policy = parse_gate_policy(v.get<std::string>());
                          } catch (const std::invalid_argument& e) {
                            throw ConfigError(e.what());
                          }
                        },
                        [](const Config& c) { return json(std::string(gate_policy_name(c.gate_policy))); },
                        false};
    t["freeze_gaze"] = member(&Config::freeze_gaze);
    t["keep_fraction"] = member(&Config::keep_fraction);
    t["sigma_px"] = member(&Config::sigma_px);
    t["action_count"] = member(&Config::action_count);
    t["random_gate_p"] = member(&Config::random_gate_p);
    t["threads"] = member(&Config::threads);
    t["data_dir"] = member(&Config::data_dir);
    t["n_trials"] = member(&Config::n_trials);
    t["train_trials"] = member(&Config::train_trials);
    t["val_trials"] = member(&Config::val_trials);
    t["steps_per_trial"] = member(&Config::steps_per_trial);
    t["max_steps"] = member(&Config::max_steps);
    t["ball_speed"] = member(&Config::ball_speed);
    t["paddle_speed"] = member(&Config::paddle_speed);
    t["paddle_half_width"] = member(&Config::paddle_half_width);
    t["gaze_noise_px"] = member(&Config::gaze_noise_px);
    t["distractor"] = member(&Config::distractor);
    t["rollouts"] = member(&Config::rollouts);
    t["eval_seed"] = member(&Config::eval_seed);
    return t;
  }();
  return table;
}

void set_field(Config& c, const std::string& key, const json& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.read(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Values from key=value text: JSON scalars where they parse, bare strings otherwise.
json parse_scalar(const std::string& text) {
  try {
    json v = json::parse(text);
    if (v.is_primitive()) return v;
  } catch (const json::exception&) {
  }
  return json(text);
}

}  // namespace

json to_json(const Config& c) {
  json j = json::object();
  for (const auto& [k, f] : fields()) j[k] = f.write(c);
  return j;
}

json result_json(const Config& c) {
  json j = to_json(c);
  j.erase("data_dir");
  j.erase("threads");
  return j;
}

Config config_from_json(const json& j, Config base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) set_field(base, k, v);
  return base;
}

void apply_override(Config& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  set_field(c, trim(assignment.substr(0, eq)), parse_scalar(trim(assignment.substr(eq + 1))));
}

Config load_config_file(const std::filesystem::path& path, Config base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j, base);
  }
  std::istringstream lines(text);
  std::string line;
  int row = 0;
  while (std::getline(lines, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_override(base, line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return base;
}

Config resolve_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides) {
  Config c;
  if (const char* env = std::getenv("SEA_DATA_DIR"); env && *env) c.data_dir = env;
  if (c.data_dir.empty()) c.data_dir = "data";
  if (file) c = load_config_file(*file, c);
  for (const auto& o : overrides) apply_override(c, o);
  c.validate();
  return c;
}

void write_resolved_config(const Config& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json", std::ios::binary);
  out << to_json(c).dump(2) << '\n';
}

std::string config_hash(const Config& c) {
  const std::string s = result_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sea
