#include "doctest.h"
#include "test_util.hpp"

#include "sea/minicatch.hpp"

#include <cmath>
#include <fstream>
#include <set>

using namespace sea;
using namespace sea::minicatch;

namespace {

EnvState plain_state() {
  EnvState s;
  s.ball = {10, 10, 0, 1};
  s.paddle_x = 10;
  return s;
}

double dist(GazePoint a, GazePoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST_SUITE("env_step") {
  TEST_CASE("aligned catch scores and bounces") {
    EnvConfig cfg;
    auto s = plain_state();
    s.ball = {10, kPaddleRow - 1, 0, 1};
    auto r = env_step(s, noop, cfg);
    CHECK(r.reward == 1);
    CHECK_FALSE(r.done);
    CHECK(r.state.phase() == Phase::ascending);
    CHECK(r.state.score == 1);
  }

  TEST_CASE("misaligned by two cells misses") {
    EnvConfig cfg;
    auto s = plain_state();
    s.ball = {12, kPaddleRow - 1, 0, 1};
    auto r = env_step(s, noop, cfg);
    CHECK(r.reward == 0);
    CHECK(r.done);
  }

  TEST_CASE("wall reflection") {
    EnvConfig cfg;
    auto s = plain_state();
    s.ball = {0, 5, -1, 1};
    auto r = env_step(s, noop, cfg);
    CHECK(r.state.ball.x == 1);
    CHECK(r.state.ball.dx == 1);
    CHECK(r.state.ball.y == 6);
  }

  TEST_CASE("top re-serve descends from row 0") {
    EnvConfig cfg;
    auto s = plain_state();
    s.ball = {4, 0, 1, -1};
    auto r = env_step(s, noop, cfg);
    CHECK(r.state.ball.y == 0);
    CHECK(r.state.ball.dy == 1);
    CHECK(r.state.phase() == Phase::descending);
  }

  TEST_CASE("paddle moves and clamps") {
    EnvConfig cfg;
    auto s = plain_state();
    CHECK(env_step(s, left, cfg).state.paddle_x == 8);
    CHECK(env_step(s, right, cfg).state.paddle_x == 12);
    s.paddle_x = 1;
    CHECK(env_step(s, left, cfg).state.paddle_x == 1);
    CHECK_THROWS_AS(env_step(s, 3, cfg), std::out_of_range);
  }

  TEST_CASE("deterministic traces and phase convention") {
    EnvConfig cfg;
    Rng actions(9);
    std::vector<int> seq;
    for (int i = 0; i < 400; ++i) seq.push_back(int(actions.uniform_int(3)));
    auto run = [&] {
      std::vector<EnvState> trace;
      auto s = env_reset(cfg, Rng(3));
      for (int a : seq) {
        s = env_step(s, a, cfg).state;
        trace.push_back(s);
        CHECK((s.phase() == Phase::descending) == (s.ball.dy > 0));
        CHECK(s.ball.x >= 0);
        CHECK(s.ball.x < kGridSize);
        CHECK(s.ball.y >= 0);
        CHECK(s.ball.y < kGridSize);
        CHECK(s.distractor.y < kDistractorRows);
        if (s.done) break;
      }
      return trace;
    };
    auto a = run(), b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].ball == b[i].ball);
      CHECK(a[i].distractor == b[i].distractor);
      CHECK(a[i].paddle_x == b[i].paddle_x);
    }
  }

  TEST_CASE("episode ends at max_steps") {
    EnvConfig cfg;
    cfg.max_steps = 3;
    cfg.distractor = false;
    auto s = env_reset(cfg, Rng(1));
    for (int i = 0; i < 3; ++i) s = env_step(s, noop, cfg).state;
    CHECK(s.done);
  }
}

TEST_SUITE("render") {
  TEST_CASE("paddle only pixel count") {
    EnvConfig cfg;
    cfg.distractor = false;
    auto s = plain_state();
    s.ball = {0, 0, 0, 1};
    Frame f = render(s, cfg);
    const auto paddle = (f == kPaddleValue).count();
    CHECK(paddle == (2 * cfg.paddle_half_width + 1) * 16);
    CHECK((f == kBallValue).count() == 16);
  }

  TEST_CASE("ball cell maps to a 4x4 block") {
    EnvConfig cfg;
    cfg.distractor = false;
    auto s = plain_state();
    Frame f = render(s, cfg);
    for (int r = 0; r < 84; ++r)
      for (int c = 0; c < 84; ++c) {
        const bool inside = r >= 40 && r < 44 && c >= 40 && c < 44;
        if (inside) CHECK(f(r, c) == kBallValue);
        else CHECK(f(r, c) != kBallValue);
      }
  }

  TEST_CASE("injective on sampled states") {
    EnvConfig cfg;
    cfg.distractor = false;
    Rng rng(4);
    std::set<std::tuple<int, int, int>> seen;
    std::vector<std::pair<std::tuple<int, int, int>, Frame>> frames;
    while (frames.size() < 100) {
      EnvState s;
      s.ball = {int(rng.uniform_int(21)), int(rng.uniform_int(20)), 0, 1};
      s.paddle_x = 1 + int(rng.uniform_int(19));
      auto key = std::make_tuple(s.ball.x, s.ball.y, s.paddle_x);
      if (!seen.insert(key).second) continue;
      frames.emplace_back(key, render(s, cfg));
    }
    for (std::size_t i = 0; i < frames.size(); ++i)
      for (std::size_t j = i + 1; j < frames.size(); ++j)
        CHECK_FALSE((frames[i].second == frames[j].second).all());
  }

  TEST_CASE("observe matches the on-disk encoding") {
    EnvConfig cfg;
    auto s = env_reset(cfg, Rng(2));
    Frame o = observe(s, cfg);
    CHECK((o * 255.0f - (o * 255.0f).round()).abs().maxCoeff() < 1e-4f);
    CHECK(o.maxCoeff() == 1.0f);
  }
}

TEST_SUITE("demonstrator") {
  TEST_CASE("descending tracks the ball") {
    EnvConfig cfg;
    Rng rng(0);
    auto s = plain_state();
    s.ball = {4, 5, 0, 1};
    CHECK(demonstrator_action(s, rng, cfg) == left);
    s.ball = {16, 5, 0, 1};
    CHECK(demonstrator_action(s, rng, cfg) == right);
    s.ball = {10, 5, 0, 1};
    CHECK(demonstrator_action(s, rng, cfg) == noop);
  }

  TEST_CASE("ascending noop fraction") {
    EnvConfig cfg;
    Rng rng(17);
    auto s = plain_state();
    s.ball.dy = -1;
    int noops = 0, lefts = 0;
    for (int i = 0; i < 10000; ++i) {
      const int a = demonstrator_action(s, rng, cfg);
      noops += a == noop;
      lefts += a == left;
    }
    // binomial(10^4, 0.8): sd = 40
    CHECK(noops >= 7800);
    CHECK(noops <= 8200);
    CHECK(lefts == doctest::Approx(1000).epsilon(0.15));
  }
}

TEST_SUITE("synthetic_gaze") {
  TEST_CASE("noise-free descending gaze is the ball centre") {
    EnvConfig cfg;
    cfg.gaze_noise_px = 0;
    Rng rng(1);
    auto s = plain_state();
    auto g = synthetic_gaze(s, rng, cfg);
    CHECK(g == GazePoint{41.5, 41.5});
  }

  TEST_CASE("ascending gaze follows the distractor") {
    EnvConfig cfg;
    cfg.gaze_noise_px = 0;
    Rng rng(1);
    auto s = plain_state();
    s.ball.dy = -1;
    s.has_distractor = true;
    s.distractor = {3, 7, 1, 1};
    CHECK(synthetic_gaze(s, rng, cfg) == cell_center(3, 7));
  }

  TEST_CASE("noise standard deviation") {
    EnvConfig cfg;
    cfg.gaze_noise_px = 2.0;
    Rng rng(8);
    auto s = plain_state();
    double sum = 0, sq = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const double v = synthetic_gaze(s, rng, cfg).x - 41.5;
      sum += v;
      sq += v * v;
    }
    const double sd = std::sqrt((sq - sum * sum / n) / (n - 1));
    CHECK(sd >= 1.9);
    CHECK(sd <= 2.1);
  }
}

TEST_CASE("generate_dataset") {
  const auto root = test::scratch_dir("minicatch_gen");
  DatasetConfig cfg;
  cfg.env.seed = 21;
  const auto trials = generate_dataset(cfg, root / "a");
  REQUIRE(trials.size() == 20);

  double desc_dist = 0, asc_dist = 0;
  int desc_n = 0, asc_n = 0;
  for (const auto& t : trials) {
    CHECK(t.steps.size() == 480);
    CHECK(t.frames.size() == 480);
    CHECK(t.phase.size() == 480);
    int catches = 0;
    for (std::size_t i = 1; i < t.steps.size(); ++i)
      if (t.steps[i].episode == t.steps[i - 1].episode && t.steps[i].score > t.steps[i - 1].score)
        ++catches;
    CHECK(catches >= 10);
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      if (t.steps[i].gaze_points.empty()) continue;
      // ball is the unique brightest 4x4 block
      Eigen::Index r = 0, c = 0;
      t.frames[i].maxCoeff(&r, &c);
      const GazePoint ball{c + 1.5, r + 1.5};
      const double d = dist(t.steps[i].gaze_points.back(), ball) / kCellPx;
      if (t.phase[i]) {
        desc_dist += d;
        ++desc_n;
      } else {
        asc_dist += d;
        ++asc_n;
      }
    }
  }
  MESSAGE("mean gaze-ball distance (cells): descending " << desc_dist / desc_n << ", ascending "
                                                         << asc_dist / asc_n);
  CHECK(asc_dist / asc_n - desc_dist / desc_n >= 5.0);

  const auto reloaded = load_dataset(root / "a");
  REQUIRE(reloaded.size() == 20);
  CHECK(reloaded[3].phase == trials[3].phase);
  for (std::size_t i = 0; i < 480; i += 37)
    CHECK((reloaded[3].frames[i] == trials[3].frames[i]).all());

  DatasetConfig small = cfg;
  small.n_trials = 2;
  small.steps_per_trial = 60;
  generate_dataset(small, root / "b");
  generate_dataset(small, root / "c");
  for (const char* trial : {"trial_00", "trial_01"}) {
    for (const char* file : {"labels.csv", "meta.json", "frames/17.pgm"}) {
      std::ifstream x(root / "b" / trial / file, std::ios::binary),
          y(root / "c" / trial / file, std::ios::binary);
      std::string sx((std::istreambuf_iterator<char>(x)), {}), sy((std::istreambuf_iterator<char>(y)), {});
      CHECK(!sx.empty());
      CHECK(sx == sy);
    }
  }
}
