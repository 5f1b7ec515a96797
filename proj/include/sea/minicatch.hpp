#pragma once

#include "sea/dataset.hpp"
#include "sea/gazemap.hpp"
#include "sea/image.hpp"
#include "sea/numerics/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sea::minicatch {

inline constexpr int kGridSize = 21;
inline constexpr int kCellPx = 4;
inline constexpr int kPaddleRow = kGridSize - 1;
inline constexpr int kActionCount = 3;
/// Distractor rows are [0, kDistractorRows).
inline constexpr int kDistractorRows = 15;

inline constexpr float kBallValue = 1.0f;
inline constexpr float kPaddleValue = 0.7f;
inline constexpr float kDistractorValue = 0.4f;

enum Action : int { noop = 0, left = 1, right = 2 };

enum class Phase { descending, ascending };

struct EnvConfig {
  std::uint64_t seed = 0;
  int max_steps = 400;
  int ball_speed = 1;
  int paddle_speed = 2;
  int paddle_half_width = 1;
  double gaze_noise_px = 2.0;
  bool distractor = true;

  void validate() const;
};

struct Sprite {
  int x = 0;
  int y = 0;
  int dx = 0;
  int dy = 0;

  friend bool operator==(const Sprite&, const Sprite&) = default;
};

struct EnvState {
  Sprite ball;
  Sprite distractor;
  bool has_distractor = false;
  int paddle_x = kGridSize / 2;
  int score = 0;
  int steps = 0;
  bool done = false;
  /// Stream used for re-serves; part of the state so stepping is a pure function.
  Rng rng;

  /// Descending iff the ball moves toward the paddle row.
  Phase phase() const { return ball.dy > 0 ? Phase::descending : Phase::ascending; }
};

struct StepResult {
  EnvState state;
  int reward = 0;
  bool done = false;
};

EnvState env_reset(const EnvConfig& cfg, Rng rng);

/// Paddle moves first, then the ball advances `ball_speed` cells with wall
/// reflection. A ball reaching the paddle row within the paddle span scores
/// and bounces upward; otherwise the episode ends. A ball that rises past
/// the top is re-served downward from a random top cell.
StepResult env_step(const EnvState& state, int action, const EnvConfig& cfg);

/// 84x84 frame: background 0, distractor, paddle, ball (later layers overwrite).
Frame render(const EnvState& state, const EnvConfig& cfg);

/// render() passed through the 8-bit frame encoding used on disk.
Frame observe(const EnvState& state, const EnvConfig& cfg);

/// Centre of a grid cell in 84-pixel coordinates.
GazePoint cell_center(int x, int y);

int demonstrator_action(const EnvState& state, Rng& rng, const EnvConfig& cfg);

/// Ball centre plus noise while descending; distractor centre plus noise
/// (or a uniform location without distractor) while ascending.
GazePoint synthetic_gaze(const EnvState& state, Rng& rng, const EnvConfig& cfg);

struct DatasetConfig {
  EnvConfig env;
  int n_trials = 20;
  int steps_per_trial = 480;
};

/// Rolls out the demonstrator and writes `trial_<k>` directories under `root`.
/// Returns the trials with frames loaded.
std::vector<Trial> generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& root);

}  // namespace sea::minicatch
