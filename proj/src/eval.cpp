#include "sea/eval.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <thread>
#include <string>

namespace sea {

namespace mc = minicatch;

RolloutResult rollout(const PolicyFn& policy, const mc::EnvConfig& env, std::uint64_t seed) {
  env.validate();
  RolloutResult r;
  r.seed = seed;
  mc::EnvState s = mc::env_reset(env, Rng(seed).split("rollout"));
  std::vector<Frame> frames;
  Tensor<Real> stack({1, kInputChannels, kMapSize, kMapSize});
  while (!s.done) {
    frames.push_back(mc::observe(s, env));
    const auto fs = make_frame_stack(frames, frames.size() - 1);
    stack.data() = Eigen::Map<const Vector<float>>(fs.channels.data(), kInputChannels * kMapCells)
                       .cast<Real>();
    const StepDecision d = policy(stack, s);
    r.actions.push_back(d.action);
    r.gates.push_back(d.gate);
    r.phase.push_back(s.phase() == mc::Phase::descending ? 1 : 0);
    auto next = mc::env_step(s, d.action, env);
    r.score += next.reward;
    s = std::move(next.state);
  }
  return r;
}

PolicyFn model_policy(SeaModel<Real>& model, GatePolicy policy, Rng& gate_rng, double random_p,
                      double keep_fraction) {
  if (model.action_count() != mc::kActionCount)
    throw std::invalid_argument("checkpoint has " + std::to_string(model.action_count()) +
                                " actions but the environment has " +
                                std::to_string(mc::kActionCount));
  set_mode(all_layers(model), Mode::inference);
  return [&model, policy, &gate_rng, random_p, keep_fraction](const Tensor<Real>& stack,
                                                             const mc::EnvState&) {
    const auto g = gaze_forward(stack, model.gaze);
    const auto maps = masked_gaze_maps(g.logits, keep_fraction);
    const auto gates = gate_forward<Real>(g.embedding, policy, model.gate, &gate_rng, nullptr, random_p);
    const Real c[] = {Real(gates[0].c)};
    const auto logits = action_forward<Real>(g.embedding, maps, c, model.action);
    Index a = 0;
    logits.as_matrix(1).row(0).maxCoeff(&a);
    return StepDecision{static_cast<int>(a), gates[0].c};
  };
}

PolicyFn demonstrator_policy(const mc::EnvConfig& env, Rng& rng) {
  return [env, &rng](const Tensor<Real>&, const mc::EnvState& s) {
    return StepDecision{mc::demonstrator_action(s, rng, env), -1};
  };
}

RolloutResult rollout_model(SeaModel<Real>& model, const mc::EnvConfig& env, GatePolicy policy,
                            std::uint64_t seed, double random_p, double keep_fraction) {
  Rng gate_rng = Rng(seed).split("gate");
  return rollout(model_policy(model, policy, gate_rng, random_p, keep_fraction), env, seed);
}

Evaluation evaluate(SeaModel<Real>& model, const mc::EnvConfig& env, GatePolicy policy, int n,
                    std::uint64_t base_seed, double random_p, double keep_fraction, int threads) {
  if (n < 1) throw std::invalid_argument("evaluate: n must be >= 1");
  if (threads < 1) throw std::invalid_argument("evaluate: threads must be >= 1");
  Evaluation e;
  e.policy = policy;
  e.rollouts.resize(static_cast<std::size_t>(n));
  auto run = [&](SeaModel<Real>& m, int first, int stride) {
    for (int i = first; i < n; i += stride)
      e.rollouts[std::size_t(i)] =
          rollout_model(m, env, policy, base_seed + std::uint64_t(i), random_p, keep_fraction);
  };
  const int workers = std::min(threads, n);
  if (workers == 1) {
    run(model, 0, 1);
  } else {
    std::vector<SeaModel<Real>> copies(static_cast<std::size_t>(workers), model);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          run(copies[std::size_t(w)], w, workers);
        } catch (...) {
          errors[std::size_t(w)] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  std::vector<double> scores;
  for (const auto& r : e.rollouts) scores.push_back(r.score);
  e.summary = summarize(scores);
  e.gaze_usage = gaze_usage(e.rollouts);
  return e;
}

double gaze_usage(std::span<const int> gates) {
  if (gates.empty()) return 0.0;
  long open = 0;
  for (int g : gates) open += g == 1;
  return double(open) / double(gates.size());
}

double gaze_usage(std::span<const RolloutResult> rollouts) {
  std::vector<int> all;
  for (const auto& r : rollouts) all.insert(all.end(), r.gates.begin(), r.gates.end());
  return gaze_usage(all);
}

double gate_rate_in_phase(std::span<const RolloutResult> rollouts, int phase) {
  long open = 0, total = 0;
  for (const auto& r : rollouts)
    for (std::size_t i = 0; i < r.gates.size(); ++i)
      if (r.phase[i] == phase) {
        ++total;
        open += r.gates[i] == 1;
      }
  return total == 0 ? 0.0 : double(open) / double(total);
}

namespace {

/// F1 per class from a confusion matrix, averaged over classes with support.
double average_f1(const std::vector<std::vector<long>>& cm, F1Average average,
                  std::vector<double>* per_class) {
  const std::size_t k = cm.size();
  double sum = 0.0, weight = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    long tp = cm[c][c], support = 0, predicted = 0;
    for (std::size_t j = 0; j < k; ++j) {
      support += cm[c][j];
      predicted += cm[j][c];
    }
    const double f1 = support + predicted == 0 ? 0.0 : 2.0 * double(tp) / double(support + predicted);
    if (per_class) per_class->push_back(f1);
    if (support == 0) continue;
    const double w = average == F1Average::macro ? 1.0 : double(support);
    sum += w * f1;
    weight += w;
  }
  return weight == 0.0 ? 0.0 : sum / weight;
}

}  // namespace

MetricsReport classification_metrics(std::span<const int> predicted, std::span<const int> truth,
                                     int class_count, int no_action_id, F1Average average) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("classification_metrics: prediction and truth lengths differ");
  if (truth.empty()) throw std::invalid_argument("classification_metrics: no samples");
  if (class_count < 2 || no_action_id < 0 || no_action_id >= class_count)
    throw std::invalid_argument("classification_metrics: bad class_count or no_action_id");
  const auto k = static_cast<std::size_t>(class_count);
  MetricsReport m;
  m.confusion.assign(k, std::vector<long>(k, 0));
  std::vector<std::vector<long>> binary(2, std::vector<long>(2, 0));
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= class_count || p < 0 || p >= class_count)
      throw std::invalid_argument("classification_metrics: label " + std::to_string(t < 0 || t >= class_count ? t : p) +
                                  " outside [0, " + std::to_string(class_count) + ")");
    ++m.confusion[std::size_t(t)][std::size_t(p)];
    ++binary[t != no_action_id][p != no_action_id];
    correct += t == p;
  }
  m.accuracy = double(correct) / double(truth.size());
  m.f1_all = average_f1(m.confusion, average, &m.per_class_f1);
  m.f1_binary = average_f1(binary, average, nullptr);
  return m;
}

}  // namespace sea
