#pragma once

#include "sea/checkpoint.hpp"
#include "sea/config.hpp"
#include "sea/dataset.hpp"
#include "sea/models.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace sea {

#ifdef SEA_USE_DOUBLE
using Real = double;
#else
using Real = float;
#endif

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;  // action training only
  double val_accuracy = 0.0;
  double gaze_usage = 0.0;  // fraction of training samples with an open gate
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
  Checkpoint checkpoint;  // best validation epoch
  Checkpoint final_checkpoint;  // after the last epoch
  std::vector<EpochLog> history;
  double initial_val_loss = 0.0;
  int best_epoch = 0;  // 0 = the initial weights
};

/// Raised when the divergence guard trips; carries the last good checkpoint.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_good)
      : std::runtime_error(what), last_good(std::move(last_good)) {}
  Checkpoint last_good;
};

struct SampleRef {
  std::uint32_t trial = 0;
  std::uint32_t step = 0;
};

std::vector<SampleRef> enumerate_samples(const std::vector<Trial>& trials);

/// [B,4,84,84] frame stacks.
Tensor<Real> make_stack_batch(const std::vector<Trial>& trials, std::span<const SampleRef> samples);

/// [B, 84*84] Gaussian targets around each step's last gaze point (uniform without one).
RowMatrix<Real> make_gaze_targets(const std::vector<Trial>& trials,
                                  std::span<const SampleRef> samples, double sigma_px);

/// Gaze network outputs cached per sample (frozen, inference-mode gaze network).
struct GazeFeatures {
  RowMatrix<Real> embedding;  // [N, 64*9*9]
  RowMatrix<Real> maps;       // [N, 84*84] percentile-masked
  RowMatrix<Real> raw_maps;   // [N, 84*84] softmax maps (filled when requested)
  std::vector<int> labels;
  std::vector<int> phase;  // -1 when unknown

  Index size() const { return embedding.rows(); }
};

GazeFeatures compute_gaze_features(GazeNet<Real>& net, const std::vector<Trial>& trials,
                                   double keep_fraction, bool keep_raw_maps = false);

/// Mean KL over the samples with BN in inference mode.
double gaze_loss(GazeNet<Real>& net, const std::vector<Trial>& trials, double sigma_px);

Checkpoint make_gaze_checkpoint(GazeNet<Real>& net, const Config& cfg);
Checkpoint make_sea_checkpoint(SeaModel<Real>& model, const Config& cfg);

/// Loads the gaze part (and the gate/action parts when the checkpoint has them).
SeaModel<Real> model_from_checkpoint(const Checkpoint& c, Index action_count);

TrainResult train_gaze(const std::vector<Trial>& train, const std::vector<Trial>& val,
                       const Config& cfg, const EpochCallback& on_epoch = {});

TrainResult train_action(const std::vector<Trial>& train, const std::vector<Trial>& val,
                         const Checkpoint& gaze_checkpoint, const Config& cfg,
                         const EpochCallback& on_epoch = {});

struct ActionPredictions {
  std::vector<int> predicted;
  std::vector<int> gates;
  double loss = 0.0;
};

/// Inference-mode predictions over cached features. The random policy draws
/// from a stream derived from `seed`.
ActionPredictions predict_actions(SeaModel<Real>& model, const GazeFeatures& f, GatePolicy policy,
                                  std::uint64_t seed, double random_p = 0.5);

}  // namespace sea
