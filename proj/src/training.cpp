#include "sea/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sea {

using nlohmann::json;

namespace {

constexpr Index kEvalBatch = 64;
constexpr double kDivergenceFactor = 10.0;
constexpr int kDivergencePatience = 3;

AdamOptions adam_options(const Config& cfg) {
  AdamOptions o;
  o.lr = cfg.lr;
  o.beta1 = cfg.beta1;
  o.beta2 = cfg.beta2;
  return o;
}

json history_json(const std::vector<EpochLog>& h) {
  json a = json::array();
  for (const auto& e : h)
    a.push_back({{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"val_loss", e.val_loss},
                 {"train_accuracy", e.train_accuracy},
                 {"val_accuracy", e.val_accuracy},
                 {"gaze_usage", e.gaze_usage}});
  return a;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, int batch_size, Rng rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(n, b + static_cast<std::size_t>(batch_size));
    if (e - b < 2) break;  // batch norm needs two samples
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return batches;
}

template <typename Fn>
void for_each_chunk(Index n, Index chunk, Fn&& fn) {
  for (Index b = 0; b < n; b += chunk) fn(b, std::min(n, b + chunk));
}

/// Divergence guard state shared by both trainers.
struct Guard {
  double initial;
  int strikes = 0;

  void check(double loss, const char* what, const Checkpoint& last_good) {
    if (!std::isfinite(loss))
      throw TrainingDiverged(std::string(what) + ": non-finite loss", last_good);
    strikes = loss > kDivergenceFactor * initial ? strikes + 1 : 0;
    if (strikes >= kDivergencePatience)
      throw TrainingDiverged(std::string(what) + ": loss above 10x its initial value for " +
                                 std::to_string(kDivergencePatience) + " epochs",
                             last_good);
  }
};

void require_data(const std::vector<Trial>& train, const std::vector<Trial>& val, const char* what) {
  auto count = [](const std::vector<Trial>& t) {
    std::size_t n = 0;
    for (const auto& x : t) n += x.steps.size();
    return n;
  };
  if (count(train) < 2) throw std::invalid_argument(std::string(what) + ": empty training set");
  if (count(val) < 1) throw std::invalid_argument(std::string(what) + ": empty validation set");
  for (const auto* set : {&train, &val})
    for (const auto& t : *set)
      if (t.frames.size() != t.steps.size())
        throw std::invalid_argument(std::string(what) + ": trial " + t.trial_id +
                                    " has no loaded frames");
}

}  // namespace

std::vector<SampleRef> enumerate_samples(const std::vector<Trial>& trials) {
  std::vector<SampleRef> out;
  for (std::size_t t = 0; t < trials.size(); ++t)
    for (std::size_t i = 0; i < trials[t].steps.size(); ++i)
      out.push_back({static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(i)});
  return out;
}

Tensor<Real> make_stack_batch(const std::vector<Trial>& trials, std::span<const SampleRef> samples) {
  const Index n = static_cast<Index>(samples.size());
  Tensor<Real> x({n, kInputChannels, kMapSize, kMapSize});
  for (Index b = 0; b < n; ++b) {
    const auto& s = samples[static_cast<std::size_t>(b)];
    const auto stack = make_frame_stack(trials[s.trial], s.step);
    x.data().segment(b * kInputChannels * kMapCells, kInputChannels * kMapCells) =
        Eigen::Map<const Vector<float>>(stack.channels.data(), kInputChannels * kMapCells)
            .cast<Real>();
  }
  return x;
}

RowMatrix<Real> make_gaze_targets(const std::vector<Trial>& trials,
                                  std::span<const SampleRef> samples, double sigma_px) {
  RowMatrix<Real> t(static_cast<Index>(samples.size()), kMapCells);
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const auto g = last_gaze_point_84(trials[samples[b].trial], samples[b].step);
    std::vector<GazePoint> pts;
    if (g) pts.push_back(*g);
    const auto m = gaussian_gaze_target<double>(pts, sigma_px, kMapSize, kMapSize);
    t.row(static_cast<Index>(b)) =
        Eigen::Map<const RowMatrix<double>>(m.values.data(), 1, kMapCells).cast<Real>();
  }
  return t;
}

GazeFeatures compute_gaze_features(GazeNet<Real>& net, const std::vector<Trial>& trials,
                                   double keep_fraction, bool keep_raw_maps) {
  const auto layers = gaze_layers(net);
  set_mode(layers, Mode::inference);
  const auto samples = enumerate_samples(trials);
  const Index n = static_cast<Index>(samples.size());
  GazeFeatures f;
  f.embedding.resize(n, kEmbedValues);
  f.maps.resize(n, kMapCells);
  if (keep_raw_maps) f.raw_maps.resize(n, kMapCells);
  for (const auto& s : samples) {
    f.labels.push_back(trials[s.trial].steps[s.step].action);
    const auto& ph = trials[s.trial].phase;
    f.phase.push_back(ph.empty() ? -1 : ph[s.step]);
  }
  for_each_chunk(n, kEvalBatch, [&](Index b, Index e) {
    const std::span<const SampleRef> chunk(samples.data() + b, static_cast<std::size_t>(e - b));
    const auto out = gaze_forward(make_stack_batch(trials, chunk), net);
    f.embedding.middleRows(b, e - b) = out.embedding.as_matrix(e - b);
    f.maps.middleRows(b, e - b) = masked_gaze_maps(out.logits, keep_fraction).as_matrix(e - b);
    if (keep_raw_maps)
      for (Index i = b; i < e; ++i) {
        const auto m = gaze_map(out.logits, i - b);
        f.raw_maps.row(i) = Eigen::Map<const RowMatrix<Real>>(m.values.data(), 1, kMapCells);
      }
  });
  return f;
}

double gaze_loss(GazeNet<Real>& net, const std::vector<Trial>& trials, double sigma_px) {
  const auto layers = gaze_layers(net);
  std::vector<Mode> saved;
  for (auto& l : layers) saved.push_back(l.second->mode);
  set_mode(layers, Mode::inference);
  const auto samples = enumerate_samples(trials);
  const Index n = static_cast<Index>(samples.size());
  double total = 0.0;
  for_each_chunk(n, kEvalBatch, [&](Index b, Index e) {
    const std::span<const SampleRef> chunk(samples.data() + b, static_cast<std::size_t>(e - b));
    const auto out = gaze_forward(make_stack_batch(trials, chunk), net);
    const auto r = kl_softmax_loss(make_gaze_targets(trials, chunk, sigma_px),
                                   RowMatrix<Real>(out.logits.as_matrix(e - b)));
    total += double(r.loss) * double(e - b);
  });
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].second->mode = saved[i];
  return total / double(n);
}

Checkpoint make_gaze_checkpoint(GazeNet<Real>& net, const Config& cfg) {
  Checkpoint c;
  c.kind = "gaze";
  c.config = result_json(cfg);
  export_layers(c, gaze_layers(net));
  return c;
}

Checkpoint make_sea_checkpoint(SeaModel<Real>& model, const Config& cfg) {
  Checkpoint c;
  c.kind = "sea";
  c.config = result_json(cfg);
  c.config["action_count"] = model.action_count();
  export_layers(c, all_layers(model));
  return c;
}

SeaModel<Real> model_from_checkpoint(const Checkpoint& c, Index action_count) {
  if (c.kind != "gaze" && c.kind != "sea")
    throw CheckpointError("unknown checkpoint kind '" + c.kind + "'");
  if (c.kind == "sea") {
    const Index stored = c.at("action.fc2.bias").shape.at(0);
    if (stored != action_count)
      throw CheckpointError("checkpoint has " + std::to_string(stored) +
                            " actions but the configuration expects " +
                            std::to_string(action_count));
  }
  auto m = make_sea_model<Real>(action_count, 0);
  import_layers(c, gaze_layers(m.gaze));
  if (c.kind == "sea") {
    import_layers(c, gate_layers(m.gate));
    import_layers(c, action_layers(m.action));
  }
  return m;
}

TrainResult train_gaze(const std::vector<Trial>& train, const std::vector<Trial>& val,
                       const Config& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  require_data(train, val, "train_gaze");
  const FlushDenormals ftz;
  const Rng root = Rng(cfg.seed).split("train_gaze");
  GazeNet<Real> net = make_gaze_net<Real>(root.split("init"));
  const auto layers = gaze_layers(net);
  auto params = named_weights(layers);
  AdamState<Real> adam;
  adam.options = adam_options(cfg);
  const double sigma = cfg.gaze_sigma();
  const auto samples = enumerate_samples(train);

  TrainResult result;
  result.initial_val_loss = gaze_loss(net, val, sigma);
  result.checkpoint = make_gaze_checkpoint(net, cfg);
  double best = result.initial_val_loss;
  Guard guard{result.initial_val_loss};

  for (int epoch = 1; epoch <= cfg.gaze_epochs; ++epoch) {
    set_mode(layers, Mode::training);
    double total = 0.0;
    Index seen = 0;
    for (const auto& batch : shuffled_batches(samples.size(), cfg.batch_size,
                                              root.split("shuffle").split(std::uint64_t(epoch)))) {
      std::vector<SampleRef> refs;
      for (auto i : batch) refs.push_back(samples[i]);
      const Index n = static_cast<Index>(refs.size());
      zero_grad(layers);
      GazeCache<Real> cache;
      const auto out = gaze_forward(make_stack_batch(train, refs), net, &cache);
      const auto loss =
          kl_softmax_loss(make_gaze_targets(train, refs, sigma), RowMatrix<Real>(out.logits.as_matrix(n)));
      if (!std::isfinite(double(loss.loss)))
        throw TrainingDiverged("train_gaze: non-finite loss", result.checkpoint);
      Tensor<Real> dlogits(out.logits.shape());
      dlogits.as_matrix(n) = loss.grad;
      gaze_backward<Real>(dlogits, nullptr, cache, net);
      adam_step<Real>(params, adam);
      total += double(loss.loss) * double(n);
      seen += n;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / double(seen);
    log.val_loss = gaze_loss(net, val, sigma);
    guard.check(log.val_loss, "train_gaze", result.checkpoint);
    result.history.push_back(log);
    if (log.val_loss < best) {
      best = log.val_loss;
      result.best_epoch = epoch;
      result.checkpoint = make_gaze_checkpoint(net, cfg);
    }
    if (on_epoch) on_epoch(log);
  }
  result.final_checkpoint = make_gaze_checkpoint(net, cfg);
  result.checkpoint.metrics = {{"initial_val_loss", result.initial_val_loss},
                               {"best_epoch", result.best_epoch},
                               {"best_val_loss", best},
                               {"history", history_json(result.history)}};
  return result;
}

ActionPredictions predict_actions(SeaModel<Real>& model, const GazeFeatures& f, GatePolicy policy,
                                  std::uint64_t seed, double random_p) {
  set_mode(action_layers(model.action), Mode::inference);
  Rng stream = Rng(seed).split("predict_gate");
  ActionPredictions p;
  const Index n = f.size();
  double total = 0.0;
  for_each_chunk(n, kEvalBatch, [&](Index b, Index e) {
    const Index m = e - b;
    Tensor<Real> emb({m, kEmbedChannels, kEmbedSize, kEmbedSize});
    emb.as_matrix(m) = f.embedding.middleRows(b, m);
    Tensor<Real> maps({m, 1, kMapSize, kMapSize});
    maps.as_matrix(m) = f.maps.middleRows(b, m);
    const auto gates = gate_forward<Real>(emb, policy, model.gate, &stream, nullptr, random_p);
    std::vector<Real> c;
    for (const auto& d : gates) {
      c.push_back(Real(d.c));
      p.gates.push_back(d.c);
    }
    const auto logits = action_forward<Real>(emb, maps, c, model.action);
    const std::span<const int> labels(f.labels.data() + b, static_cast<std::size_t>(m));
    total += double(cross_entropy_loss(RowMatrix<Real>(logits.as_matrix(m)), labels).loss) * double(m);
    for (Index i = 0; i < m; ++i) {
      Index a = 0;
      logits.as_matrix(m).row(i).maxCoeff(&a);
      p.predicted.push_back(static_cast<int>(a));
    }
  });
  p.loss = total / double(n);
  return p;
}

TrainResult train_action(const std::vector<Trial>& train, const std::vector<Trial>& val,
                         const Checkpoint& gaze_checkpoint, const Config& cfg,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  require_data(train, val, "train_action");
  const FlushDenormals ftz;
  for (const auto* set : {&train, &val})
    for (const auto& t : *set)
      for (const auto& s : t.steps)
        if (s.action >= cfg.action_count)
          throw std::invalid_argument("train_action: trial " + t.trial_id + " has action " +
                                      std::to_string(s.action) + " but action_count is " +
                                      std::to_string(cfg.action_count));
  const Rng root = Rng(cfg.seed).split("train_action");
  SeaModel<Real> model = make_sea_model<Real>(cfg.action_count, 0);
  model.action = make_action_net<Real>(cfg.action_count, root.split("init"));
  model.gate = make_gate_net<Real>(root.split("gate_init"));
  import_layers(gaze_checkpoint, gaze_layers(model.gaze));
  const auto gaze = gaze_layers(model.gaze);
  set_mode(gaze, Mode::inference);

  auto trainable = action_layers(model.action);
  if (cfg.gate_policy == GatePolicy::learned)
    for (auto& l : gate_layers(model.gate)) trainable.push_back(l);
  if (!cfg.freeze_gaze) {
    trainable.push_back(gaze[0]);
    trainable.push_back(gaze[1]);
  }
  auto params = named_weights(trainable);
  AdamState<Real> adam;
  adam.options = adam_options(cfg);

  const GazeFeatures val_features = compute_gaze_features(model.gaze, val, cfg.keep_fraction);
  GazeFeatures train_features;
  if (cfg.freeze_gaze) train_features = compute_gaze_features(model.gaze, train, cfg.keep_fraction);
  const auto samples = enumerate_samples(train);
  std::vector<int> train_labels;
  for (const auto& s : samples) train_labels.push_back(train[s.trial].steps[s.step].action);

  const std::uint64_t val_seed = root.split("val_gate").next_u64();
  auto validate = [&](EpochLog& log) {
    const GazeFeatures refreshed =
        cfg.freeze_gaze ? GazeFeatures{} : compute_gaze_features(model.gaze, val, cfg.keep_fraction);
    const GazeFeatures& vf = cfg.freeze_gaze ? val_features : refreshed;
    const auto p = predict_actions(model, vf, cfg.gate_policy, val_seed, cfg.random_gate_p);
    log.val_loss = p.loss;
    Index correct = 0;
    for (std::size_t i = 0; i < p.predicted.size(); ++i) correct += p.predicted[i] == vf.labels[i];
    log.val_accuracy = double(correct) / double(p.predicted.size());
  };

  TrainResult result;
  {
    EpochLog init;
    validate(init);
    result.initial_val_loss = init.val_loss;
  }
  result.checkpoint = make_sea_checkpoint(model, cfg);
  double best = result.initial_val_loss;
  Guard guard{result.initial_val_loss};
  Rng gate_stream = root.split("train_gate");

  for (int epoch = 1; epoch <= cfg.action_epochs; ++epoch) {
    set_mode(action_layers(model.action), Mode::training);
    double total = 0.0;
    Index seen = 0, correct = 0, open = 0;
    for (const auto& batch : shuffled_batches(samples.size(), cfg.batch_size,
                                              root.split("shuffle").split(std::uint64_t(epoch)))) {
      const Index n = static_cast<Index>(batch.size());
      zero_grad(trainable);
      Tensor<Real> emb({n, kEmbedChannels, kEmbedSize, kEmbedSize});
      Tensor<Real> maps({n, 1, kMapSize, kMapSize});
      GazeCache<Real> gaze_cache;
      if (cfg.freeze_gaze) {
        for (Index i = 0; i < n; ++i) {
          const auto k = static_cast<Index>(batch[static_cast<std::size_t>(i)]);
          emb.as_matrix(n).row(i) = train_features.embedding.row(k);
          maps.as_matrix(n).row(i) = train_features.maps.row(k);
        }
      } else {
        std::vector<SampleRef> refs;
        for (auto i : batch) refs.push_back(samples[i]);
        auto out = gaze_forward(make_stack_batch(train, refs), model.gaze, &gaze_cache);
        emb = std::move(out.embedding);
        maps = masked_gaze_maps(out.logits, cfg.keep_fraction);
      }
      std::vector<int> labels;
      for (auto i : batch) labels.push_back(train_labels[i]);

      GateCache<Real> gate_cache;
      const auto decisions = gate_forward(emb, cfg.gate_policy, model.gate, &gate_stream,
                                          cfg.gate_policy == GatePolicy::learned ? &gate_cache : nullptr,
                                          cfg.random_gate_p);
      std::vector<Real> c;
      for (const auto& d : decisions) {
        c.push_back(Real(d.c));
        open += d.c;
      }
      ActionCache<Real> action_cache;
      const auto logits = action_forward<Real>(emb, maps, c, model.action, &action_cache);
      const auto lm = RowMatrix<Real>(logits.as_matrix(n));
      const auto loss = cross_entropy_loss(lm, labels);
      if (!std::isfinite(double(loss.loss)))
        throw TrainingDiverged("train_action: non-finite loss", result.checkpoint);
      for (Index i = 0; i < n; ++i) {
        Index a = 0;
        lm.row(i).maxCoeff(&a);
        correct += a == labels[static_cast<std::size_t>(i)];
      }
      Tensor<Real> dlogits(logits.shape());
      dlogits.as_matrix(n) = loss.grad;
      const auto grads = action_backward(dlogits, action_cache, model.action);
      Tensor<Real> demb = grads.dembedding;
      if (cfg.gate_policy == GatePolicy::learned) {
        const auto dg = gate_backward(grads.dgate, gate_cache, model.gate);
        demb.data() += dg.data();
      }
      if (!cfg.freeze_gaze) embedding_backward(demb, gaze_cache, model.gaze);
      adam_step<Real>(params, adam);
      total += double(loss.loss) * double(n);
      seen += n;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / double(seen);
    log.train_accuracy = double(correct) / double(seen);
    log.gaze_usage = double(open) / double(seen);
    validate(log);
    guard.check(log.val_loss, "train_action", result.checkpoint);
    result.history.push_back(log);
    if (log.val_loss < best) {
      best = log.val_loss;
      result.best_epoch = epoch;
      result.checkpoint = make_sea_checkpoint(model, cfg);
    }
    if (on_epoch) on_epoch(log);
  }
  result.final_checkpoint = make_sea_checkpoint(model, cfg);
  result.checkpoint.metrics = {{"initial_val_loss", result.initial_val_loss},
                               {"best_epoch", result.best_epoch},
                               {"best_val_loss", best},
                               {"history", history_json(result.history)}};
  return result;
}

}  // namespace sea
