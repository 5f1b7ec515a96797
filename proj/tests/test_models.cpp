#include "doctest.h"
#include "test_util.hpp"

#include "sea/models.hpp"

#include <set>

using namespace sea;
using sea::test::random_tensor;

namespace {

Tensor<double> random_stacks(Index n, Rng& rng) { return random_tensor({n, 4, 84, 84}, rng, 0, 1); }

/// Gaussian gaze targets around random points, one row per sample.
RowMatrix<double> random_targets(Index n, Rng& rng) {
  RowMatrix<double> t(n, kMapCells);
  for (Index i = 0; i < n; ++i) {
    auto m = gaussian_gaze_target({{rng.uniform(5, 79), rng.uniform(5, 79)}}, 1.79, 84, 84);
    t.row(i) = Eigen::Map<const RowMatrix<double>>(m.values.data(), 1, kMapCells);
  }
  return t;
}

void randomize_gru(GateNet<double>& g, Rng& rng, double scale) {
  for (auto& [name, t] : g.gru.weights())
    for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
}

}  // namespace

TEST_SUITE("gaze_forward") {
  TEST_CASE("shapes") {
    Rng rng(1);
    auto m = make_sea_model<double>(3, 7);
    auto out = gaze_forward(random_stacks(2, rng), m.gaze);
    CHECK(out.embedding.shape() == Shape{2, 64, 9, 9});
    CHECK(out.logits.shape() == Shape{2, 1, 84, 84});
    CHECK_THROWS_AS(gaze_forward(Tensor<double>({2, 3, 84, 84}), m.gaze), DimensionError);
  }

  TEST_CASE("zero weights give a uniform map") {
    Rng rng(2);
    auto m = make_sea_model<double>(3, 7);
    for (auto& [name, p] : gaze_layers(m.gaze)) p->operator[]("weight").data().setZero();
    auto out = gaze_forward(random_stacks(2, rng), m.gaze);
    auto g = gaze_map(out.logits, 1);
    CHECK((g.values - 1.0 / 7056).abs().maxCoeff() < 1e-15);
  }

  TEST_CASE("deterministic") {
    Rng rng(3);
    auto m = make_sea_model<float>(3, 7);
    auto x = random_stacks(3, rng).cast<float>();
    auto a = gaze_forward(x, m.gaze);
    auto b = gaze_forward(x, m.gaze);
    CHECK(bitwise_equal(a.logits, b.logits));
    CHECK(bitwise_equal(a.embedding, b.embedding));
  }

  TEST_CASE("single-pixel perturbation stays inside the receptive field") {
    Rng rng(4);
    auto m = make_sea_model<double>(3, 11);
    set_mode(gaze_layers(m.gaze), Mode::inference);
    auto x = random_stacks(1, rng);
    const Index pr = 37, pc = 58;
    auto y = x;
    y.at(0, 2, pr, pc) += 0.5;
    auto a = gaze_forward(x, m.gaze).embedding;
    auto b = gaze_forward(y, m.gaze).embedding;
    // conv1 output i reads input rows [4i, 4i+8); conv2 output p reads conv1 rows [2p, 2p+4)
    auto affected = [](Index pixel, Index p) {
      for (Index i = 2 * p; i < 2 * p + 4; ++i)
        if (pixel >= 4 * i && pixel < 4 * i + 8) return true;
      return false;
    };
    int changed_inside = 0;
    for (Index c = 0; c < 64; ++c)
      for (Index p = 0; p < 9; ++p)
        for (Index q = 0; q < 9; ++q) {
          const bool diff = a.at(0, c, p, q) != b.at(0, c, p, q);
          if (affected(pr, p) && affected(pc, q)) changed_inside += diff;
          else CHECK_FALSE(diff);
        }
    CHECK(changed_inside > 0);
  }

  TEST_CASE("KL gradient through the gaze network") {
    Rng rng(5);
    auto m = make_sea_model<double>(3, 13);
    auto x = random_stacks(3, rng);
    auto target = random_targets(3, rng);
    auto layers = gaze_layers(m.gaze);
    zero_grad(layers);
    GazeCache<double> cache;
    auto out = gaze_forward(x, m.gaze, &cache);
    auto loss = kl_softmax_loss(target, RowMatrix<double>(out.logits.as_matrix(3)));
    Tensor<double> dlogits(out.logits.shape());
    dlogits.as_matrix(3) = loss.grad;
    gaze_backward<double>(dlogits, nullptr, cache, m.gaze);
    auto params = named_weights(layers);
    auto r = finite_diff_check(
        [&] {
          auto o = gaze_forward(x, m.gaze);
          return double(kl_softmax_loss(target, RowMatrix<double>(o.logits.as_matrix(3))).loss);
        },
        params, {.eps = 1e-6, .samples_per_tensor = 12, .seed = 3});
    MESSAGE("gaze KL worst " << r.worst_param << " rel " << r.max_rel_error);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_SUITE("gate_forward") {
  TEST_CASE("zero weights keep the gate closed") {
    Rng rng(6);
    auto emb = random_tensor({4, 64, 9, 9}, rng, 0, 2);
    auto g = make_gate_net<double>();
    for (const auto& d : gate_forward(emb, GatePolicy::learned, g, nullptr)) {
      CHECK(d.h == doctest::Approx(-0.5).epsilon(1e-15));
      CHECK(d.c == 0);
    }
  }

  TEST_CASE("fixed policies") {
    Rng rng(7);
    auto emb = random_tensor({5, 64, 9, 9}, rng);
    auto g = make_gate_net<double>();
    randomize_gru(g, rng, 3.0);
    for (const auto& d : gate_forward(emb, GatePolicy::always_off, g, nullptr)) CHECK(d.c == 0);
    for (const auto& d : gate_forward(emb, GatePolicy::always_on, g, nullptr)) CHECK(d.c == 1);
  }

  TEST_CASE("learned gate is binary and follows the sign of h") {
    Rng rng(8);
    auto g = make_gate_net<double>();
    int on = 0, total = 0;
    for (int rep = 0; rep < 20; ++rep) {
      randomize_gru(g, rng, 2.0);
      auto emb = random_tensor({8, 64, 9, 9}, rng, -1, 1);
      for (const auto& d : gate_forward(emb, GatePolicy::learned, g, nullptr)) {
        CHECK((d.c == 0 || d.c == 1));
        CHECK((d.c == 1) == (d.h > 0));
        CHECK(std::abs(d.h) < 1.0);
        on += d.c;
        ++total;
      }
    }
    CHECK(on > 0);
    CHECK(on < total);
  }

  TEST_CASE("random policy rate") {
    Rng rng(9);
    auto emb = Tensor<double>({10000, 64, 1, 1});
    auto g = make_gate_net<double>();
    Rng stream(10);
    int on = 0;
    for (const auto& d : gate_forward(emb, GatePolicy::random, g, &stream)) on += d.c;
    CHECK(on >= 4800);
    CHECK(on <= 5200);
    CHECK_THROWS_AS(gate_forward(emb, GatePolicy::random, g, nullptr), std::invalid_argument);
  }

  TEST_CASE("policy names round trip") {
    for (auto p : {GatePolicy::learned, GatePolicy::always_on, GatePolicy::always_off,
                   GatePolicy::random})
      CHECK(parse_gate_policy(gate_policy_name(p)) == p);
    CHECK_THROWS_AS(parse_gate_policy("sometimes"), std::invalid_argument);
  }
}

TEST_SUITE("action_forward") {
  TEST_CASE("closed gate equals a zero map") {
    Rng rng(11);
    auto m = make_sea_model<float>(3, 17);
    auto emb = random_tensor<float>({4, 64, 9, 9}, rng, 0, 1);
    auto maps = random_tensor<float>({4, 1, 84, 84}, rng, 0, 1);
    const std::vector<float> zeros(4, 0.0f), ones(4, 1.0f);
    auto closed = action_forward<float>(emb, maps, zeros, m.action);
    auto none = action_forward_without_gaze(emb, m.action);
    CHECK(bitwise_equal(closed, none));
    auto empty = action_forward<float>(emb, Tensor<float>({4, 1, 84, 84}), ones, m.action);
    CHECK(bitwise_equal(empty, none));
    auto open = action_forward<float>(emb, maps, ones, m.action);
    CHECK_FALSE(bitwise_equal(open, none));
    CHECK(open.shape() == Shape{4, 3});
  }

  TEST_CASE("action count follows the model") {
    auto m = make_sea_model<float>(18, 1);
    CHECK(m.action_count() == 18);
    CHECK_THROWS_AS(make_sea_model<float>(1, 1), std::invalid_argument);
  }

  TEST_CASE("cross-entropy gradient through the straight-through gate") {
    // With c = c0 + (h - h0) the forward value is unchanged at the base point
    // and dc/dh = 1, so finite differences of this surrogate check the
    // straight-through backward path exactly.
    Rng rng(12);
    auto m = make_sea_model<double>(3, 19);
    randomize_gru(m.gate, rng, 0.5);
    const Index n = 6;
    auto emb = random_tensor({n, 64, 9, 9}, rng, 0, 1);
    Tensor<double> maps({n, 1, 84, 84});
    for (Index i = 0; i < n; ++i) {
      GazeMap<double> raw(84, 84);
      for (Index k = 0; k < kMapCells; ++k) raw.values.data()[k] = rng.uniform();
      const auto masked = percentile_mask(raw, 0.1);
      maps.data().segment(i * kMapCells, kMapCells) =
          Eigen::Map<const Vector<double>>(masked.values.data(), kMapCells);
    }
    const std::vector<int> labels{0, 1, 2, 2, 1, 0};

    GateCache<double> gc;
    const auto base = gate_forward(emb, GatePolicy::learned, m.gate, nullptr, &gc);
    std::vector<double> h0, c0;
    for (const auto& d : base) {
      h0.push_back(d.h);
      c0.push_back(d.c);
      CHECK(std::abs(d.h) <= 1.0);
    }
    auto surrogate_gates = [&](const Tensor<double>& e) {
      const auto dec = gate_forward(e, GatePolicy::learned, m.gate, nullptr);
      std::vector<double> c;
      for (std::size_t i = 0; i < dec.size(); ++i) c.push_back(c0[i] + (dec[i].h - h0[i]));
      return c;
    };

    auto layers = action_layers(m.action);
    for (auto& l : gate_layers(m.gate)) layers.push_back(l);
    zero_grad(layers);
    emb.grad().setZero();
    ActionCache<double> ac;
    auto logits = action_forward<double>(emb, maps, c0, m.action, &ac);
    auto loss = cross_entropy_loss(RowMatrix<double>(logits.as_matrix(n)), labels);
    Tensor<double> dlogits(logits.shape());
    dlogits.as_matrix(n) = loss.grad;
    auto ag = action_backward(dlogits, ac, m.action);
    auto de_gate = gate_backward(ag.dgate, gc, m.gate);
    emb.grad() = ag.dembedding.data() + de_gate.data();

    auto params = named_weights(layers);
    params.push_back({"embedding", &emb});
    auto r = finite_diff_check(
        [&] {
          auto c = surrogate_gates(emb);
          auto l = action_forward<double>(emb, maps, c, m.action);
          return double(cross_entropy_loss(RowMatrix<double>(l.as_matrix(n)), labels).loss);
        },
        params, {.eps = 1e-6, .samples_per_tensor = 16, .seed = 5});
    MESSAGE("action CE worst " << r.worst_param << " rel " << r.max_rel_error << " a " << r.worst_analytic << " n " << r.worst_numeric);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(m.gate.gru["w_z"].grad().cwiseAbs().maxCoeff() > 0);
  }

  TEST_CASE("surrogate derivative is zero outside the unit band") {
    CHECK(gate_surrogate_grad(0.3) == 1.0);
    CHECK(gate_surrogate_grad(-1.0) == 1.0);
    CHECK(gate_surrogate_grad(1.5) == 0.0);
    CHECK(gate_threshold(0.0) == 0);
    CHECK(gate_threshold(1e-12) == 1);
  }
}

TEST_SUITE("sea_forward") {
  TEST_CASE("always-off equals the zero-gaze pipeline bitwise") {
    Rng rng(13);
    auto m = make_sea_model<float>(3, 23);
    set_mode(all_layers(m), Mode::inference);
    for (int rep = 0; rep < 5; ++rep) {
      auto x = random_stacks(4, rng).cast<float>();
      auto out = sea_forward(x, m, GatePolicy::always_off, nullptr);
      auto bc = action_forward_without_gaze(gaze_forward(x, m.gaze).embedding, m.action);
      CHECK(bitwise_equal(out.logits, bc));
    }
  }

  TEST_CASE("masked maps keep 706 cells") {
    Rng rng(14);
    auto m = make_sea_model<float>(3, 29);
    auto x = random_stacks(3, rng).cast<float>();
    Rng stream(1);
    auto out = sea_forward(x, m, GatePolicy::random, &stream);
    for (Index i = 0; i < 3; ++i) {
      const auto seg = out.masked_maps.data().segment(i * kMapCells, kMapCells);
      CHECK((seg.array() > 0).count() == 706);
      CHECK(seg.maxCoeff() == 1.0f);
    }
  }

  TEST_CASE("repeatable under a fixed seed") {
    Rng rng(15);
    auto x = random_stacks(2, rng).cast<float>();
    auto run = [&] {
      auto m = make_sea_model<float>(3, 31);
      Rng stream(4);
      return sea_forward(x, m, GatePolicy::learned, &stream);
    };
    auto a = run(), b = run();
    CHECK(bitwise_equal(a.logits, b.logits));
    CHECK(bitwise_equal(a.masked_maps, b.masked_maps));
    CHECK(a.gates[0].h == b.gates[0].h);
  }
}
