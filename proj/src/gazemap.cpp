#include "sea/gazemap.hpp"

#include <numbers>
#include <stdexcept>

namespace sea {

void ScreenGeometry::validate() const {
  if (!(screen_width_cm > 0 && screen_height_cm > 0 && screen_width_px > 0 &&
        screen_height_px > 0 && viewing_distance_cm > 0))
    throw std::invalid_argument("screen geometry: all fields must be positive");
}

ScreenGeometry atari_head_geometry() { return ScreenGeometry{64.6, 40.0, 1280, 840, 78.7}; }

double visual_degree_to_pixels(const ScreenGeometry& geom, double target_width_px) {
  geom.validate();
  const double cm = std::tan(std::numbers::pi / 180.0) * geom.viewing_distance_cm;
  return cm * (target_width_px / geom.screen_width_cm);
}

GazePoint scale_gaze_point(GazePoint p, double native_w, double native_h, double target_w,
                           double target_h) {
  return {p.x * target_w / native_w, p.y * target_h / native_h};
}

}  // namespace sea
