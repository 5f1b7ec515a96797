#pragma once

#include "sea/gaze_map.hpp"
#include "sea/gazemap.hpp"
#include "sea/numerics.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sea {

inline constexpr Index kInputChannels = 4;
inline constexpr Index kMapSize = 84;
inline constexpr Index kMapCells = kMapSize * kMapSize;
inline constexpr Index kEmbedChannels = 64;
inline constexpr Index kEmbedSize = 9;
inline constexpr Index kEmbedValues = kEmbedChannels * kEmbedSize * kEmbedSize;
inline constexpr Index kGazeBranchChannels = 16;
inline constexpr Index kGazeBranchSize = 20;
inline constexpr Index kGazeBranchValues = kGazeBranchChannels * kGazeBranchSize * kGazeBranchSize;
inline constexpr Index kHiddenUnits = 512;
inline constexpr double kGazeBranchBetaInit = 0.1;
/// GRU init bound, 1/sqrt(hidden size) for the scalar gate.
inline constexpr double kGateInitScale = 1.0;
/// Initial GRU state of the gate.
inline constexpr double kGateInitialState = -1.0;

// ---------------------------------------------------------------------------
// Gate policies

enum class GatePolicy { learned, always_on, always_off, random };

std::string_view gate_policy_name(GatePolicy p);
/// Accepts learned|on|off|random.
GatePolicy parse_gate_policy(std::string_view s);

struct GateDecision {
  double h = 0.0;  // pre-threshold activation, 0 when the policy does not evaluate the GRU
  int c = 0;
  GatePolicy policy = GatePolicy::learned;
};

/// c = ReLU(sgn(h)) with sgn(0) = 0.
inline int gate_threshold(double h) { return h > 0.0 ? 1 : 0; }

/// Straight-through surrogate derivative dc/dh.
inline double gate_surrogate_grad(double h) { return std::abs(h) <= 1.0 ? 1.0 : 0.0; }

// ---------------------------------------------------------------------------
// Parameters. A conv block's LayerParams holds "weight", "gamma", "beta" and
// the batch-norm running statistics.

template <typename Scalar>
struct GazeNet {
  LayerParams<Scalar> conv1;    // [32,4,8,8] stride 4
  LayerParams<Scalar> conv2;    // [64,32,4,4] stride 2
  LayerParams<Scalar> deconv1;  // [64,32,4,4] stride 2
  LayerParams<Scalar> deconv2;  // [32,1,8,8] stride 4
};

template <typename Scalar>
struct GateNet {
  LayerParams<Scalar> gru;  // input 64, hidden 1
};

template <typename Scalar>
struct ActionNet {
  LayerParams<Scalar> gaze_conv;  // W_e [16,1,8,8] stride 4
  LayerParams<Scalar> fc1;        // [512, embed + gaze branch]
  LayerParams<Scalar> fc2;        // [action_count, 512]
};

template <typename Scalar>
struct SeaModel {
  GazeNet<Scalar> gaze;
  GateNet<Scalar> gate;
  ActionNet<Scalar> action;

  Index action_count() const { return action.fc2["bias"].size(); }
};

namespace detail {

template <typename Scalar>
LayerParams<Scalar> make_conv_block(const Shape& kernel, Index bn_channels, Index fan_in, Rng& rng) {
  auto p = make_batchnorm_params<Scalar>(bn_channels);
  Tensor<Scalar> w(kernel);
  const double bound = std::sqrt(6.0 / double(fan_in));
  for (Index i = 0; i < w.size(); ++i) w[i] = Scalar(rng.uniform(-bound, bound));
  p.add("weight", std::move(w));
  return p;
}

template <typename Scalar>
LayerParams<Scalar> make_dense(Index out, Index in, Rng& rng, double gain = 6.0) {
  LayerParams<Scalar> p;
  Tensor<Scalar> w({out, in});
  const double bound = std::sqrt(gain / double(in));
  for (Index i = 0; i < w.size(); ++i) w[i] = Scalar(rng.uniform(-bound, bound));
  p.add("weight", std::move(w));
  p.add("bias", Tensor<Scalar>::zeros({out}));
  return p;
}

}  // namespace detail

/// He-uniform kernels, unit BN scale.
template <typename Scalar>
GazeNet<Scalar> make_gaze_net(Rng rng) {
  GazeNet<Scalar> n;
  n.conv1 = detail::make_conv_block<Scalar>({32, kInputChannels, 8, 8}, 32, kInputChannels * 64,
                                            rng);
  n.conv2 = detail::make_conv_block<Scalar>({64, 32, 4, 4}, 64, 32 * 16, rng);
  // a transposed conv with stride s sees about C_in * (k/s)^2 inputs per output
  n.deconv1 = detail::make_conv_block<Scalar>({64, 32, 4, 4}, 32, 64 * 4, rng);
  n.deconv2 = detail::make_conv_block<Scalar>({32, 1, 8, 8}, 1, 32 * 4, rng);
  return n;
}

/// Zero weights: h = -0.5 for every input, so the learned gate starts closed.
template <typename Scalar>
GateNet<Scalar> make_gate_net() {
  return {make_gru_params<Scalar>(kEmbedChannels, 1)};
}

/// Every GRU weight and bias uniform in [-scale, scale].
template <typename Scalar>
GateNet<Scalar> make_gate_net(Rng rng, double scale = kGateInitScale) {
  GateNet<Scalar> g = make_gate_net<Scalar>();
  for (auto& [name, t] : g.gru.weights())
    for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(rng.uniform(-scale, scale));
  return g;
}

template <typename Scalar>
ActionNet<Scalar> make_action_net(Index action_count, Rng rng) {
  if (action_count < 2) throw std::invalid_argument("action_count must be >= 2");
  ActionNet<Scalar> n;
  n.gaze_conv = detail::make_conv_block<Scalar>({kGazeBranchChannels, 1, 8, 8},
                                                kGazeBranchChannels, 64, rng);
  // A closed gate feeds zeros, so BN yields beta; beta > 0 keeps the ReLU (and
  // with it dL/dc) live while every gate in a batch is closed.
  n.gaze_conv["beta"].data().setConstant(Scalar(kGazeBranchBetaInit));
  n.fc1 = detail::make_dense<Scalar>(kHiddenUnits, kEmbedValues + kGazeBranchValues, rng);
  n.fc2 = detail::make_dense<Scalar>(action_count, kHiddenUnits, rng, 3.0);
  return n;
}

template <typename Scalar>
SeaModel<Scalar> make_sea_model(Index action_count, std::uint64_t seed) {
  Rng rng(seed);
  return {make_gaze_net<Scalar>(rng.split("gaze")), make_gate_net<Scalar>(rng.split("gate")),
          make_action_net<Scalar>(action_count, rng.split("action"))};
}

// ---------------------------------------------------------------------------
// Parameter tables

template <typename Scalar>
std::vector<std::pair<std::string, LayerParams<Scalar>*>> gaze_layers(GazeNet<Scalar>& n) {
  return {{"gaze.conv1", &n.conv1},
          {"gaze.conv2", &n.conv2},
          {"gaze.deconv1", &n.deconv1},
          {"gaze.deconv2", &n.deconv2}};
}

template <typename Scalar>
std::vector<std::pair<std::string, LayerParams<Scalar>*>> gate_layers(GateNet<Scalar>& n) {
  return {{"gate.gru", &n.gru}};
}

template <typename Scalar>
std::vector<std::pair<std::string, LayerParams<Scalar>*>> action_layers(ActionNet<Scalar>& n) {
  return {{"action.gaze_conv", &n.gaze_conv}, {"action.fc1", &n.fc1}, {"action.fc2", &n.fc2}};
}

template <typename Scalar>
std::vector<std::pair<std::string, LayerParams<Scalar>*>> all_layers(SeaModel<Scalar>& m) {
  auto v = gaze_layers(m.gaze);
  for (auto& l : gate_layers(m.gate)) v.push_back(l);
  for (auto& l : action_layers(m.action)) v.push_back(l);
  return v;
}

template <typename Scalar>
std::vector<NamedTensor<Scalar>> named_weights(
    const std::vector<std::pair<std::string, LayerParams<Scalar>*>>& layers) {
  std::vector<NamedTensor<Scalar>> out;
  for (auto& [name, p] : layers) p->collect(name, out);
  return out;
}

template <typename Scalar>
void set_mode(const std::vector<std::pair<std::string, LayerParams<Scalar>*>>& layers, Mode m) {
  for (auto& l : layers) l.second->mode = m;
}

template <typename Scalar>
void zero_grad(const std::vector<std::pair<std::string, LayerParams<Scalar>*>>& layers) {
  for (auto& l : layers) l.second->zero_grad();
}

// ---------------------------------------------------------------------------
// Conv + BN + ReLU blocks

template <typename Scalar>
struct BlockCache {
  Tensor<Scalar> input;
  BatchNormCache<Scalar> bn;
  Tensor<Scalar> output;
};

enum class BlockKind { conv, deconv };

template <typename Scalar>
Tensor<Scalar> block_forward(const Tensor<Scalar>& x, LayerParams<Scalar>& p, BlockKind kind,
                             Index stride, BlockCache<Scalar>* cache) {
  const Conv2dOptions o{stride, 0};
  Tensor<Scalar> pre = kind == BlockKind::conv ? conv2d(x, p["weight"], o)
                                               : deconv2d(x, p["weight"], o);
  Tensor<Scalar> y = relu(batchnorm(pre, p, cache ? &cache->bn : nullptr));
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

/// Accumulates weight and BN gradients; returns dL/dx when `want_input_grad`.
template <typename Scalar>
Tensor<Scalar> block_backward(const Tensor<Scalar>& dy, const BlockCache<Scalar>& c,
                              LayerParams<Scalar>& p, BlockKind kind, Index stride,
                              bool want_input_grad) {
  const Conv2dOptions o{stride, 0};
  Tensor<Scalar> dpre = batchnorm_backward(relu_backward(dy, c.output), c.bn, p);
  auto& w = p["weight"];
  if (kind == BlockKind::conv) {
    w.grad() += conv2d_backward_kernel(dpre, c.input, w.shape(), o).data();
    if (want_input_grad) return conv2d_backward_input(dpre, w, c.input.shape(), o);
  } else {
    w.grad() += deconv2d_backward_kernel(dpre, c.input, w.shape(), o).data();
    if (want_input_grad) return deconv2d_backward_input(dpre, w, c.input.shape(), o);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Gaze network

template <typename Scalar>
struct GazeCache {
  BlockCache<Scalar> conv1, conv2, deconv1, deconv2;
};

template <typename Scalar>
struct GazeOutput {
  Tensor<Scalar> embedding;  // [N,64,9,9]
  Tensor<Scalar> logits;     // [N,1,84,84]
};

/// X_em = ReLU(BN(W_c * X)), E = ReLU(BN(W_d * X_em)) for a batch of
/// [N,4,84,84] frame stacks.
template <typename Scalar>
GazeOutput<Scalar> gaze_forward(const Tensor<Scalar>& stacks, GazeNet<Scalar>& n,
                                GazeCache<Scalar>* cache = nullptr) {
  if (stacks.rank() != 4 || stacks.dim(1) != kInputChannels || stacks.dim(2) != kMapSize ||
      stacks.dim(3) != kMapSize)
    throw DimensionError("gaze_forward: expected [N,4,84,84] input, got " +
                         shape_to_string(stacks.shape()));
  auto h1 = block_forward(stacks, n.conv1, BlockKind::conv, 4, cache ? &cache->conv1 : nullptr);
  auto em = block_forward(h1, n.conv2, BlockKind::conv, 2, cache ? &cache->conv2 : nullptr);
  auto d1 = block_forward(em, n.deconv1, BlockKind::deconv, 2, cache ? &cache->deconv1 : nullptr);
  auto logits =
      block_forward(d1, n.deconv2, BlockKind::deconv, 4, cache ? &cache->deconv2 : nullptr);
  return {std::move(em), std::move(logits)};
}

/// Backward from logits (and optionally the embedding) into every gaze weight.
template <typename Scalar>
void gaze_backward(const Tensor<Scalar>& dlogits, const Tensor<Scalar>* dembedding,
                   const GazeCache<Scalar>& c, GazeNet<Scalar>& n) {
  auto dd1 = block_backward(dlogits, c.deconv2, n.deconv2, BlockKind::deconv, 4, true);
  auto dem = block_backward(dd1, c.deconv1, n.deconv1, BlockKind::deconv, 2, true);
  if (dembedding) dem.data() += dembedding->data();
  auto dh1 = block_backward(dem, c.conv2, n.conv2, BlockKind::conv, 2, true);
  block_backward(dh1, c.conv1, n.conv1, BlockKind::conv, 4, false);
}

/// Backward from the embedding only (conv layers W_c).
template <typename Scalar>
void embedding_backward(const Tensor<Scalar>& dembedding, const GazeCache<Scalar>& c,
                        GazeNet<Scalar>& n) {
  auto dh1 = block_backward(dembedding, c.conv2, n.conv2, BlockKind::conv, 2, true);
  block_backward(dh1, c.conv1, n.conv1, BlockKind::conv, 4, false);
}

/// Softmax over the 84x84 logits of sample `i`.
template <typename Scalar>
GazeMap<Scalar> gaze_map(const Tensor<Scalar>& logits, Index i) {
  using Array = typename GazeMap<Scalar>::Array;
  Array a = Eigen::Map<const Array>(logits.ptr() + i * kMapCells, kMapSize, kMapSize);
  return softmax2d<Scalar>(a);
}

// ---------------------------------------------------------------------------
// Gate network

template <typename Scalar>
struct GateCache {
  GruCache<Scalar> gru;
  Shape embedding_shape;
  Shape pooled_shape;
  std::vector<double> h;
};

/// Global average pool over the spatial axes: [N,C,H,W] -> [N,C].
template <typename Scalar>
Tensor<Scalar> global_average_pool(const Tensor<Scalar>& x) {
  const Index n = x.dim(0), c = x.dim(1);
  Tensor<Scalar> y({n, c});
  y.data() = x.as_matrix(n * c).rowwise().mean();
  return y;
}

/// One decision per batch row. The GRU runs (and fills `cache`) only under
/// the learned policy; RandomBernoulli draws from `rng`.
template <typename Scalar>
std::vector<GateDecision> gate_forward(const Tensor<Scalar>& embedding, GatePolicy policy,
                                       const GateNet<Scalar>& g, Rng* rng,
                                       GateCache<Scalar>* cache = nullptr,
                                       double random_p = 0.5) {
  const Index n = embedding.dim(0);
  std::vector<GateDecision> out(static_cast<std::size_t>(n));
  for (auto& d : out) d.policy = policy;
  switch (policy) {
    case GatePolicy::always_on:
      for (auto& d : out) d.c = 1;
      return out;
    case GatePolicy::always_off:
      return out;
    case GatePolicy::random:
      if (!rng) throw std::invalid_argument("gate_forward: random policy needs an rng stream");
      for (auto& d : out) d.c = rng->bernoulli(random_p) ? 1 : 0;
      return out;
    case GatePolicy::learned:
      break;
  }
  if (embedding.rank() != 4 || embedding.dim(1) != kEmbedChannels)
    throw DimensionError("gate_forward: expected [N,64,H,W] embedding, got " +
                         shape_to_string(embedding.shape()));
  const auto pooled = global_average_pool(embedding);
  const auto h0 = Tensor<Scalar>::constant({n, 1}, Scalar(kGateInitialState));
  const auto h = gru_cell(pooled, h0, g.gru, cache ? &cache->gru : nullptr);
  for (Index i = 0; i < n; ++i) {
    auto& d = out[static_cast<std::size_t>(i)];
    d.h = static_cast<double>(h[i]);
    d.c = gate_threshold(d.h);
  }
  if (cache) {
    cache->embedding_shape = embedding.shape();
    cache->pooled_shape = pooled.shape();
    cache->h.clear();
    for (const auto& d : out) cache->h.push_back(d.h);
  }
  return out;
}

/// Straight-through backward: dh = dc * 1{|h| <= 1}; accumulates W_g
/// gradients and returns dL/d(embedding).
template <typename Scalar>
Tensor<Scalar> gate_backward(const std::vector<double>& dc, const GateCache<Scalar>& c,
                             GateNet<Scalar>& g) {
  const Index n = static_cast<Index>(dc.size());
  Tensor<Scalar> dh({n, 1});
  for (Index i = 0; i < n; ++i)
    dh[i] = Scalar(dc[static_cast<std::size_t>(i)] *
                   gate_surrogate_grad(c.h[static_cast<std::size_t>(i)]));
  auto grads = gru_cell_backward(dh, c.gru, g.gru, c.pooled_shape, Shape{n, 1});
  Tensor<Scalar> de(c.embedding_shape);
  const Index ch = c.embedding_shape[1];
  const Index inner = de.size() / (n * ch);
  for (Index i = 0; i < n * ch; ++i)
    de.data().segment(i * inner, inner).setConstant(grads.dx[i] / Scalar(inner));
  return de;
}

// ---------------------------------------------------------------------------
// Action network

template <typename Scalar>
struct ActionCache {
  Tensor<Scalar> maps;  // ungated [N,1,84,84]
  BlockCache<Scalar> gaze_conv;
  Tensor<Scalar> features;  // [N, embed + branch]
  Tensor<Scalar> hidden;    // post-ReLU [N,512]
};

/// logits = W_a [X_em ; ReLU(BN(W_e * (map * c)))]. `gates` holds one
/// (possibly fractional) gate value per row; `maps` is [N,1,84,84] or [N,84*84].
template <typename Scalar>
Tensor<Scalar> action_forward(const Tensor<Scalar>& embedding, const Tensor<Scalar>& maps,
                              std::span<const Scalar> gates, ActionNet<Scalar>& a,
                              ActionCache<Scalar>* cache = nullptr) {
  const Index n = embedding.dim(0);
  if (embedding.size() != n * kEmbedValues)
    throw DimensionError("action_forward: embedding shape " + shape_to_string(embedding.shape()) +
                         " is not [N,64,9,9]");
  if (maps.size() != n * kMapCells)
    throw DimensionError("action_forward: gaze maps shape " + shape_to_string(maps.shape()) +
                         " does not hold N 84x84 maps");
  if (static_cast<Index>(gates.size()) != n)
    throw DimensionError("action_forward: " + std::to_string(gates.size()) + " gates for " +
                         std::to_string(n) + " rows");
  Tensor<Scalar> gated({n, 1, kMapSize, kMapSize});
  for (Index i = 0; i < n; ++i)
    gated.data().segment(i * kMapCells, kMapCells) =
        maps.data().segment(i * kMapCells, kMapCells) * gates[static_cast<std::size_t>(i)];
  auto branch = block_forward(gated, a.gaze_conv, BlockKind::conv, 4,
                              cache ? &cache->gaze_conv : nullptr);
  Tensor<Scalar> features({n, kEmbedValues + kGazeBranchValues});
  auto fm = features.as_matrix(n);
  fm.leftCols(kEmbedValues) = embedding.as_matrix(n);
  fm.rightCols(kGazeBranchValues) = branch.as_matrix(n);
  auto hidden = relu(dense(features, a.fc1));
  auto logits = dense(hidden, a.fc2);
  if (cache) {
    cache->maps = maps.reshaped({n, 1, kMapSize, kMapSize});
    cache->features = std::move(features);
    cache->hidden = std::move(hidden);
  }
  return logits;
}

/// action_forward with the gaze branch fed an all-zero map.
template <typename Scalar>
Tensor<Scalar> action_forward_without_gaze(const Tensor<Scalar>& embedding, ActionNet<Scalar>& a) {
  const Index n = embedding.dim(0);
  const Tensor<Scalar> zeros({n, 1, kMapSize, kMapSize});
  const std::vector<Scalar> ones(static_cast<std::size_t>(n), Scalar(1));
  return action_forward<Scalar>(embedding, zeros, ones, a);
}

template <typename Scalar>
struct ActionGrads {
  Tensor<Scalar> dembedding;
  std::vector<double> dgate;  // dL/dc per row
};

/// Accumulates W_e and W_a gradients.
template <typename Scalar>
ActionGrads<Scalar> action_backward(const Tensor<Scalar>& dlogits, const ActionCache<Scalar>& c,
                                    ActionNet<Scalar>& a) {
  const Index n = dlogits.dim(0);
  auto dhidden = relu_backward(dense_backward(dlogits, c.hidden, a.fc2), c.hidden);
  auto dfeatures = dense_backward(dhidden, c.features, a.fc1);
  auto dfm = dfeatures.as_matrix(n);
  ActionGrads<Scalar> g;
  g.dembedding = Tensor<Scalar>({n, kEmbedChannels, kEmbedSize, kEmbedSize});
  g.dembedding.as_matrix(n) = dfm.leftCols(kEmbedValues);
  Tensor<Scalar> dbranch({n, kGazeBranchChannels, kGazeBranchSize, kGazeBranchSize});
  dbranch.as_matrix(n) = dfm.rightCols(kGazeBranchValues);
  auto dgated = block_backward(dbranch, c.gaze_conv, a.gaze_conv, BlockKind::conv, 4, true);
  g.dgate.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    g.dgate[static_cast<std::size_t>(i)] = static_cast<double>(
        dgated.data().segment(i * kMapCells, kMapCells).dot(
            c.maps.data().segment(i * kMapCells, kMapCells)));
  return g;
}

// ---------------------------------------------------------------------------
// Composite pass

template <typename Scalar>
struct SeaOutput {
  Tensor<Scalar> logits;             // [N, action_count]
  std::vector<GateDecision> gates;
  Tensor<Scalar> masked_maps;        // [N,1,84,84] percentile-masked, before gating
  Tensor<Scalar> embedding;
};

/// Percentile-masks every map of a [N,1,84,84] logit batch after softmax.
template <typename Scalar>
Tensor<Scalar> masked_gaze_maps(const Tensor<Scalar>& logits, double keep_fraction) {
  const Index n = logits.dim(0);
  Tensor<Scalar> out({n, 1, kMapSize, kMapSize});
  for (Index i = 0; i < n; ++i) {
    const auto m = percentile_mask(gaze_map(logits, i), keep_fraction);
    out.data().segment(i * kMapCells, kMapCells) =
        Eigen::Map<const Vector<Scalar>>(m.values.data(), kMapCells);
  }
  return out;
}

/// gaze_forward -> percentile_mask -> gate_forward -> action_forward.
template <typename Scalar>
SeaOutput<Scalar> sea_forward(const Tensor<Scalar>& stacks, SeaModel<Scalar>& m,
                              GatePolicy policy, Rng* rng, double keep_fraction = 0.10) {
  auto g = gaze_forward(stacks, m.gaze);
  SeaOutput<Scalar> out;
  out.masked_maps = masked_gaze_maps(g.logits, keep_fraction);
  out.gates = gate_forward(g.embedding, policy, m.gate, rng);
  std::vector<Scalar> c;
  for (const auto& d : out.gates) c.push_back(Scalar(d.c));
  out.logits = action_forward<Scalar>(g.embedding, out.masked_maps, c, m.action);
  out.embedding = std::move(g.embedding);
  return out;
}

}  // namespace sea
