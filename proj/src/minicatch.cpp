#include "sea/minicatch.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sea::minicatch {

namespace fs = std::filesystem;

void EnvConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (ball_speed < 1) throw std::invalid_argument("ball_speed must be >= 1");
  if (paddle_speed < 1) throw std::invalid_argument("paddle_speed must be >= 1");
  if (paddle_half_width < 0 || 2 * paddle_half_width + 1 > kGridSize)
    throw std::invalid_argument("paddle_half_width out of range");
  if (!(gaze_noise_px >= 0.0)) throw std::invalid_argument("gaze_noise_px must be >= 0");
}

namespace {

int random_dx(Rng& rng) { return static_cast<int>(rng.uniform_int(3)) - 1; }

void serve(Sprite& ball, Rng& rng) {
  ball.x = static_cast<int>(rng.uniform_int(kGridSize));
  ball.y = 0;
  ball.dx = random_dx(rng);
  ball.dy = 1;
}

void reflect(int& pos, int& vel, int lo, int hi) {
  if (pos < lo) {
    pos = 2 * lo - pos;
    vel = -vel;
  } else if (pos > hi) {
    pos = 2 * hi - pos;
    vel = -vel;
  }
}

int clamp_paddle(int x, int half) { return std::clamp(x, half, kGridSize - 1 - half); }

void fill_cell(Frame& f, int x, int y, float v) {
  f.block(y * kCellPx, x * kCellPx, kCellPx, kCellPx).setConstant(v);
}

}  // namespace

EnvState env_reset(const EnvConfig& cfg, Rng rng) {
  cfg.validate();
  EnvState s;
  s.rng = rng.split("env");
  serve(s.ball, s.rng);
  s.paddle_x = kGridSize / 2;
  s.has_distractor = cfg.distractor;
  if (cfg.distractor) {
    s.distractor.x = static_cast<int>(s.rng.uniform_int(kGridSize));
    s.distractor.y = static_cast<int>(s.rng.uniform_int(kDistractorRows));
    s.distractor.dx = s.rng.bernoulli(0.5) ? 1 : -1;
    s.distractor.dy = s.rng.bernoulli(0.5) ? 1 : -1;
  }
  return s;
}

StepResult env_step(const EnvState& state, int action, const EnvConfig& cfg) {
  if (action < 0 || action >= kActionCount)
    throw std::out_of_range("env_step: action " + std::to_string(action) + " outside [0,3)");
  StepResult r{state, 0, state.done};
  if (state.done) return r;
  EnvState& s = r.state;
  const int move = action == left ? -cfg.paddle_speed : action == right ? cfg.paddle_speed : 0;
  s.paddle_x = clamp_paddle(s.paddle_x + move, cfg.paddle_half_width);

  for (int k = 0; k < cfg.ball_speed && !s.done; ++k) {
    Sprite& b = s.ball;
    int nx = b.x + b.dx;
    reflect(nx, b.dx, 0, kGridSize - 1);
    const int ny = b.y + b.dy;
    if (ny >= kPaddleRow) {
      if (std::abs(nx - s.paddle_x) <= cfg.paddle_half_width) {
        ++r.reward;
        ++s.score;
        b.x = nx;
        b.y = kPaddleRow - 1;
        b.dy = -1;
      } else {
        b.x = nx;
        b.y = kPaddleRow;
        s.done = true;
      }
    } else if (ny < 0) {
      serve(b, s.rng);
    } else {
      b.x = nx;
      b.y = ny;
    }
  }

  if (s.has_distractor) {
    Sprite& d = s.distractor;
    d.x += d.dx;
    d.y += d.dy;
    reflect(d.x, d.dx, 0, kGridSize - 1);
    reflect(d.y, d.dy, 0, kDistractorRows - 1);
  }
  ++s.steps;
  if (s.steps >= cfg.max_steps) s.done = true;
  r.done = s.done;
  return r;
}

Frame render(const EnvState& state, const EnvConfig& cfg) {
  Frame f = Frame::Zero(kFrameSize, kFrameSize);
  if (state.has_distractor) fill_cell(f, state.distractor.x, state.distractor.y, kDistractorValue);
  for (int dx = -cfg.paddle_half_width; dx <= cfg.paddle_half_width; ++dx)
    fill_cell(f, state.paddle_x + dx, kPaddleRow, kPaddleValue);
  fill_cell(f, state.ball.x, state.ball.y, kBallValue);
  return f;
}

Frame observe(const EnvState& state, const EnvConfig& cfg) {
  return preprocess_frame(frame_to_image(render(state, cfg)));
}

GazePoint cell_center(int x, int y) {
  const double half = (kCellPx - 1) / 2.0;
  return {x * kCellPx + half, y * kCellPx + half};
}

int demonstrator_action(const EnvState& state, Rng& rng, const EnvConfig& cfg) {
  if (state.phase() == Phase::ascending) {
    if (rng.bernoulli(0.8)) return noop;
    return rng.bernoulli(0.5) ? left : right;
  }
  int nx = state.ball.x + state.ball.dx;
  int dx = state.ball.dx;
  reflect(nx, dx, 0, kGridSize - 1);
  const int gap = nx - state.paddle_x;
  if (std::abs(gap) < cfg.paddle_speed) return noop;
  return gap < 0 ? left : right;
}

GazePoint synthetic_gaze(const EnvState& state, Rng& rng, const EnvConfig& cfg) {
  GazePoint base;
  if (state.phase() == Phase::descending) {
    base = cell_center(state.ball.x, state.ball.y);
  } else if (state.has_distractor) {
    base = cell_center(state.distractor.x, state.distractor.y);
  } else {
    return {rng.uniform(0.0, kFrameSize), rng.uniform(0.0, kFrameSize)};
  }
  const double sx = rng.normal(), sy = rng.normal();
  return {base.x + cfg.gaze_noise_px * sx, base.y + cfg.gaze_noise_px * sy};
}

std::vector<Trial> generate_dataset(const DatasetConfig& cfg, const fs::path& root) {
  cfg.env.validate();
  if (cfg.n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  if (cfg.steps_per_trial < 1) throw std::invalid_argument("steps_per_trial must be >= 1");
  EnvConfig env = cfg.env;
  env.max_steps = cfg.steps_per_trial;
  const Rng base(cfg.env.seed);
  std::vector<Trial> trials;
  trials.reserve(static_cast<std::size_t>(cfg.n_trials));
  for (int t = 0; t < cfg.n_trials; ++t) {
    const Rng trial_rng = base.split("trial").split(static_cast<std::uint64_t>(t));
    Rng demo_rng = trial_rng.split("demonstrator");
    Rng gaze_rng = trial_rng.split("gaze");
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%02d", t);
    const fs::path dir = root / name;
    fs::create_directories(dir / "frames");

    Trial trial;
    trial.trial_id = name;
    trial.subject_id = "demonstrator";
    trial.native_width = kFrameSize;
    trial.native_height = kFrameSize;
    trial.action_count = kActionCount;

    std::int64_t episode = 0;
    int episode_rng = 0;
    EnvState s = env_reset(env, trial_rng.split(static_cast<std::uint64_t>(episode_rng++)));
    int total = 0;
    for (int i = 0; i < cfg.steps_per_trial; ++i) {
      const Image img = frame_to_image(render(s, env));
      TrajectoryStep step;
      step.frame_id = i;
      step.frame_path = dir / "frames" / (std::to_string(i) + ".pgm");
      write_pgm(step.frame_path, img);
      step.episode = episode;
      step.score = total;
      step.action = demonstrator_action(s, demo_rng, env);
      GazePoint g = synthetic_gaze(s, gaze_rng, env);
      if (g.x >= 0 && g.y >= 0 && g.x < kFrameSize && g.y < kFrameSize)
        step.gaze_points.push_back({round_gaze_coordinate(g.x), round_gaze_coordinate(g.y)});
      trial.phase.push_back(s.phase() == Phase::descending ? 1 : 0);
      trial.frames.push_back(preprocess_frame(img));
      trial.steps.push_back(std::move(step));

      auto r = env_step(s, trial.steps.back().action, env);
      total += r.reward;
      s = std::move(r.state);
      if (s.done && i + 1 < cfg.steps_per_trial) {
        ++episode;
        total = 0;
        s = env_reset(env, trial_rng.split(static_cast<std::uint64_t>(episode_rng++)));
      }
    }
    write_trial_metadata(dir, trial);
    trials.push_back(std::move(trial));
  }
  return trials;
}

}  // namespace sea::minicatch
