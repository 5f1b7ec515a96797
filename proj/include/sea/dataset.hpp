#pragma once

#include "sea/gazemap.hpp"
#include "sea/image.hpp"
#include "sea/numerics/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sea {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kStackDepth = 4;
inline constexpr int kAtariActionCount = 18;

/// One demonstration record.
struct TrajectoryStep {
  std::int64_t frame_id = 0;
  std::filesystem::path frame_path;
  int action = 0;
  std::vector<GazePoint> gaze_points;  // native-resolution pixels
  std::int64_t episode = 0;
  double score = 0.0;
};

struct Trial {
  std::string trial_id;
  std::string subject_id;
  int native_width = kFrameSize;
  int native_height = kFrameSize;
  int action_count = kAtariActionCount;
  ScreenGeometry geometry = atari_head_geometry();
  std::vector<TrajectoryStep> steps;
  /// Preprocessed 84x84 frames aligned with `steps` (empty when not loaded).
  std::vector<Frame> frames;
  /// Per-step phase labels (1 = descending) when the source records them; never model input.
  std::vector<int> phase;
};

/// Four preprocessed frames, oldest first, as a [4, 84*84] row-major block.
struct FrameStack {
  RowMatrix<float> channels;

  Frame channel(int k) const;
};

struct ParseOptions {
  int action_count = kAtariActionCount;
  /// Native frame extents; inferred from the first frame when unset.
  std::optional<int> native_width;
  std::optional<int> native_height;
  bool load_frames = true;
};

/// Reads `frame_id,episode,score,action,gaze_xy` labels and the matching
/// `<frame_id>.pgm` / `.png` frames. Out-of-bounds gaze points are dropped.
Trial parse_trial(const std::filesystem::path& label_file, const std::filesystem::path& frame_dir,
                  const ParseOptions& options = {});

/// Loads `<dir>/labels.csv`, `<dir>/frames/` and `<dir>/meta.json`.
Trial load_trial_dir(const std::filesystem::path& dir, bool load_frames = true);

/// Loads every `trial_*` directory under `root`, sorted by name.
std::vector<Trial> load_dataset(const std::filesystem::path& root, bool load_frames = true);

/// Label CSV text for the steps of `trial`.
std::string serialize_labels(const Trial& trial);

/// Writes labels.csv and meta.json (frames are written by the producer).
void write_trial_metadata(const std::filesystem::path& dir, const Trial& trial);

/// Rounds a coordinate to the 3-decimal precision stored in label files.
double round_gaze_coordinate(double v);

/// Frames i-3..i, indices before the trial start repeat frame 0.
FrameStack make_frame_stack(const Trial& trial, std::size_t i);

/// Same as make_frame_stack over an arbitrary frame history.
FrameStack make_frame_stack(const std::vector<Frame>& frames, std::size_t i);

/// Last recorded gaze point of a step mapped onto the 84x84 grid.
std::optional<GazePoint> last_gaze_point_84(const Trial& trial, std::size_t i);

struct TrialSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Seed-deterministic split at trial granularity.
TrialSplit split_trials(std::size_t trial_count, std::size_t train_count, std::size_t val_count,
                        std::uint64_t seed);

/// Converts an Atari-HEAD label text file (`frame_id,episode_id,score,
/// duration(ms),unclipped_reward,action,gaze_positions`) into this
/// project's trial layout under `out_dir`, copying frames to
/// `frames/<index>.png`. Returns the number of steps written.
std::size_t convert_atari_head(const std::filesystem::path& label_txt,
                               const std::filesystem::path& frame_dir,
                               const std::filesystem::path& out_dir, int native_width = 160,
                               int native_height = 210);

}  // namespace sea
