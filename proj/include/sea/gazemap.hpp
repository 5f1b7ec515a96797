#pragma once

#include "sea/gaze_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sea {

/// Physical display used when gaze was recorded.
struct ScreenGeometry {
  double screen_width_cm = 64.6;
  double screen_height_cm = 40.0;
  double screen_width_px = 1280;
  double screen_height_px = 840;
  double viewing_distance_cm = 78.7;

  void validate() const;
};

/// Eye-tracking setup of the Atari-HEAD recordings.
ScreenGeometry atari_head_geometry();

/// Pixels spanned by one visual degree on an image resampled to `target_width_px`.
double visual_degree_to_pixels(const ScreenGeometry& geom, double target_width_px);

struct GazePoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const GazePoint&, const GazePoint&) = default;
};

/// Linear mapping of a native-resolution coordinate onto a `target_w` x `target_h` grid.
GazePoint scale_gaze_point(GazePoint p, double native_w, double native_h, double target_w,
                           double target_h);

/// Normalised mixture of isotropic Gaussians centred on `points` (pixel
/// (col,row) sits at coordinate (x,y) = (col,row)). No points gives the
/// uniform map.
template <typename Scalar = double>
GazeMap<Scalar> gaussian_gaze_target(const std::vector<GazePoint>& points, double sigma_px,
                                     Eigen::Index height, Eigen::Index width) {
  if (!(sigma_px > 0.0)) throw std::invalid_argument("gaussian_gaze_target: sigma_px must be > 0");
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("gaussian_gaze_target: shape must be positive");
  using Array = typename GazeMap<Scalar>::Array;
  if (points.empty()) {
    return GazeMap<Scalar>(Array::Constant(height, width, Scalar(1.0 / double(height * width))),
                           true);
  }
  Eigen::ArrayXXd acc = Eigen::ArrayXXd::Zero(height, width);
  const double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
  for (const auto& p : points) {
    Eigen::ArrayXXd g(height, width);
    for (Eigen::Index r = 0; r < height; ++r)
      for (Eigen::Index c = 0; c < width; ++c) {
        const double dx = double(c) - p.x, dy = double(r) - p.y;
        g(r, c) = std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
    const double s = g.sum();
    // A point far outside the grid underflows everywhere; it contributes a uniform component.
    if (s > 0.0)
      acc += g / s;
    else
      acc += 1.0 / double(height * width);
  }
  acc /= acc.sum();
  return GazeMap<Scalar>(acc.cast<Scalar>(), true);
}

inline Eigen::Index percentile_survivor_count(Eigen::Index cells, double keep_fraction) {
  return static_cast<Eigen::Index>(std::ceil(keep_fraction * double(cells) - 1e-9));
}

/// Keeps the ceil(keep_fraction * N) largest cells (ties broken by row-major
/// index, earlier first), zeroes the rest and rescales so the maximum is 1.
template <typename Scalar>
GazeMap<Scalar> percentile_mask(const GazeMap<Scalar>& map, double keep_fraction = 0.10) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("percentile_mask: keep_fraction must lie in (0, 1]");
  const Eigen::Index n = map.size();
  const Eigen::Index keep = std::min(n, percentile_survivor_count(n, keep_fraction));
  const Scalar* v = map.values.data();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::nth_element(order.begin(), order.begin() + (keep - 1), order.end(),
                   [v](Eigen::Index a, Eigen::Index b) {
                     return v[a] > v[b] || (v[a] == v[b] && a < b);
                   });
  GazeMap<Scalar> out(map.height(), map.width());
  Scalar* o = out.values.data();
  Scalar peak = Scalar(0);
  for (Eigen::Index k = 0; k < keep; ++k) {
    const auto i = order[static_cast<std::size_t>(k)];
    o[i] = v[i];
    peak = std::max(peak, v[i]);
  }
  if (peak > Scalar(0)) out.values /= peak;
  out.normalized = false;
  return out;
}

template <typename Scalar>
std::pair<Eigen::Index, Eigen::Index> argmax(const GazeMap<Scalar>& map) {
  Eigen::Index r = 0, c = 0;
  map.values.maxCoeff(&r, &c);
  return {r, c};
}

}  // namespace sea
