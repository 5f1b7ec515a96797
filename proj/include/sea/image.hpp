#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace sea {

/// 8-bit image, 1 (gray) or 3 (RGB) interleaved channels, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int row, int col, int ch = 0) const {
    return pixels[static_cast<std::size_t>((row * width + col) * channels + ch)];
  }
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grayscale frame with values in [0, 1], indexed (row, column).
using Frame = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kFrameSize = 84;

Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);
/// Dispatches on extension (.pgm or .png).
Image read_image(const std::filesystem::path& path);

/// Luminance (0.299, 0.587, 0.114) grayscale conversion followed by
/// area-averaging resampling to `size` x `size`; output in [0, 1].
Frame preprocess_frame(const Image& raw, int size = kFrameSize);

/// Quantises a [0,1] frame to an 8-bit grayscale image.
Image frame_to_image(const Frame& frame);

}  // namespace sea
