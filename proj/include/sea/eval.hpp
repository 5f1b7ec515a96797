#pragma once

#include "sea/minicatch.hpp"
#include "sea/stats.hpp"
#include "sea/training.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sea {

struct StepDecision {
  int action = 0;
  int gate = -1;  // -1 when the policy has no gate
};

/// Chooses an action from the current [1,4,84,84] frame stack and the true state.
using PolicyFn = std::function<StepDecision(const Tensor<Real>& stack, const minicatch::EnvState& state)>;

struct RolloutResult {
  std::uint64_t seed = 0;
  double score = 0.0;
  std::vector<int> actions;
  std::vector<int> gates;
  std::vector<int> phase;  // 1 = descending
};

/// One episode from env_reset(Rng(seed)) until done; frame stacks pad with the first frame.
RolloutResult rollout(const PolicyFn& policy, const minicatch::EnvConfig& env, std::uint64_t seed);

/// Greedy policy over the model with BN in inference mode. The random gate draws
/// from `gate_rng`, which the caller owns.
PolicyFn model_policy(SeaModel<Real>& model, GatePolicy policy, Rng& gate_rng, double random_p = 0.5,
                      double keep_fraction = 0.10);

/// The scripted demonstrator wrapped as a policy.
PolicyFn demonstrator_policy(const minicatch::EnvConfig& env, Rng& rng);

/// Model rollout; the random gate stream derives from the seed alone, so policies share it.
RolloutResult rollout_model(SeaModel<Real>& model, const minicatch::EnvConfig& env, GatePolicy policy,
                            std::uint64_t seed, double random_p = 0.5, double keep_fraction = 0.10);

struct Evaluation {
  GatePolicy policy = GatePolicy::learned;
  ScoreSummary summary;
  double gaze_usage = 0.0;
  std::vector<RolloutResult> rollouts;
};

/// Rollouts on seeds base_seed .. base_seed + n - 1. With threads > 1 each worker
/// uses its own model copy; results do not depend on the thread count.
Evaluation evaluate(SeaModel<Real>& model, const minicatch::EnvConfig& env, GatePolicy policy, int n,
                    std::uint64_t base_seed, double random_p = 0.5, double keep_fraction = 0.10,
                    int threads = 1);

/// Mean of the binary gate outputs over every frame of every rollout.
double gaze_usage(std::span<const RolloutResult> rollouts);
double gaze_usage(std::span<const int> gates);

/// Fraction of open gates over frames with the given phase; 0 when there are none.
double gate_rate_in_phase(std::span<const RolloutResult> rollouts, int phase);

enum class F1Average { macro, weighted };

struct MetricsReport {
  double accuracy = 0.0;
  double f1_all = 0.0;     // over every action class with support
  double f1_binary = 0.0;  // action vs no-action, same averaging
  std::vector<double> per_class_f1;
  std::vector<std::vector<long>> confusion;  // [truth][prediction]
  double gaze_usage = 0.0;
};

/// Classes with zero support are excluded from the average.
MetricsReport classification_metrics(std::span<const int> predicted, std::span<const int> truth,
                                     int class_count, int no_action_id = 0,
                                     F1Average average = F1Average::macro);

}  // namespace sea
