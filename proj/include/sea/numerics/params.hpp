#pragma once

#include "sea/numerics/tensor.hpp"

#include <algorithm>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sea {

enum class Mode { training, inference };

/// Named reference to a tensor owned elsewhere (optimizer and checkpoint view).
template <typename Scalar>
struct NamedTensor {
  std::string name;
  Tensor<Scalar>* tensor;
};

/// Learnable weights of one layer plus batch-norm running statistics.
template <typename Scalar>
class LayerParams {
 public:
  Tensor<Scalar>& add(std::string name, Tensor<Scalar> value) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    weights_.emplace_back(std::move(name), std::move(value));
    return weights_.back().second;
  }

  bool contains(std::string_view name) const {
    return std::any_of(weights_.begin(), weights_.end(),
                       [&](const auto& w) { return w.first == name; });
  }

  Tensor<Scalar>& operator[](std::string_view name) {
    for (auto& [n, t] : weights_)
      if (n == name) return t;
    throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  }
  const Tensor<Scalar>& operator[](std::string_view name) const {
    for (const auto& [n, t] : weights_)
      if (n == name) return t;
    throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  }

  std::vector<std::pair<std::string, Tensor<Scalar>>>& weights() { return weights_; }
  const std::vector<std::pair<std::string, Tensor<Scalar>>>& weights() const { return weights_; }

  void zero_grad() {
    for (auto& w : weights_) w.second.zero_grad();
  }

  /// Appends "<prefix>.<name>" references for every weight.
  void collect(const std::string& prefix, std::vector<NamedTensor<Scalar>>& out) {
    for (auto& [n, t] : weights_) out.push_back({prefix + "." + n, &t});
  }

  Vector<Scalar> bn_running_mean;
  Vector<Scalar> bn_running_var;
  Mode mode = Mode::training;

 private:
  std::vector<std::pair<std::string, Tensor<Scalar>>> weights_;
};

}  // namespace sea
