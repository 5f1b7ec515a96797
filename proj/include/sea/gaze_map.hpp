#pragma once

#include <Eigen/Dense>

#include <utility>

namespace sea {

/// Non-negative map over an image grid, indexed (row, column).
/// `normalized` marks maps that are probability distributions.
template <typename Scalar>
struct GazeMap {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Array values;
  bool normalized = false;

  GazeMap() = default;
  GazeMap(Eigen::Index height, Eigen::Index width) : values(Array::Zero(height, width)) {}
  explicit GazeMap(Array v, bool is_normalized = false)
      : values(std::move(v)), normalized(is_normalized) {}

  Eigen::Index height() const { return values.rows(); }
  Eigen::Index width() const { return values.cols(); }
  Eigen::Index size() const { return values.size(); }
  Scalar operator()(Eigen::Index row, Eigen::Index col) const { return values(row, col); }
  Scalar& operator()(Eigen::Index row, Eigen::Index col) { return values(row, col); }
  Scalar sum() const { return values.sum(); }
};

}  // namespace sea
