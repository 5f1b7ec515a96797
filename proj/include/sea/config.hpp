#pragma once

#include "sea/minicatch.hpp"
#include "sea/models.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sea {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat pipeline configuration: training, environment and evaluation fields.
struct Config {
  // training
  std::uint64_t seed = 0;
  int batch_size = 32;
  int gaze_epochs = 10;
  int action_epochs = 10;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  GatePolicy gate_policy = GatePolicy::learned;
  bool freeze_gaze = true;
  double keep_fraction = 0.10;
  double sigma_px = 0.0;  // 0 selects one visual degree at 84 px
  int action_count = minicatch::kActionCount;
  double random_gate_p = 0.5;
  int threads = 1;
  // dataset
  std::string data_dir;
  int n_trials = 20;
  int train_trials = 15;
  int val_trials = 5;
  int steps_per_trial = 480;
  // environment
  int max_steps = 400;
  int ball_speed = 1;
  int paddle_speed = 2;
  int paddle_half_width = 1;
  double gaze_noise_px = 2.0;
  bool distractor = true;
  // evaluation
  int rollouts = 30;
  std::uint64_t eval_seed = 1000;

  void validate() const;
  /// sigma_px, resolving the 0 default.
  double gaze_sigma() const;
  minicatch::EnvConfig env() const;
  minicatch::DatasetConfig dataset() const;
};

nlohmann::json to_json(const Config& c);
/// to_json without the fields that cannot change results (data_dir, threads).
nlohmann::json result_json(const Config& c);
/// Rejects unknown keys and ill-typed values.
Config config_from_json(const nlohmann::json& j, Config base = {});

/// Applies one `key=value` assignment.
void apply_override(Config& c, const std::string& assignment);

/// Reads a JSON object or `key=value` lines ('#' starts a comment).
Config load_config_file(const std::filesystem::path& path, Config base = {});

/// Defaults (data_dir from SEA_DATA_DIR when set), then the file, then the overrides.
Config resolve_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides);

void write_resolved_config(const Config& c, const std::filesystem::path& dir);

/// FNV-1a of the canonical result_json dump, as 16 hex digits.
std::string config_hash(const Config& c);

}  // namespace sea
