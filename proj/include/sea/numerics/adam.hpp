#pragma once

#include "sea/numerics/params.hpp"
#include "sea/numerics/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>

namespace sea {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  struct Moments {
    Vector<Scalar> m;
    Vector<Scalar> v;
  };

  AdamOptions options;
  std::int64_t step = 0;
  std::map<std::string, Moments> moments;
};

/// One bias-corrected Adam update of every tensor in `params`, using the
/// gradient slot of each tensor.
template <typename Scalar>
void adam_step(std::span<const NamedTensor<Scalar>> params, AdamState<Scalar>& state) {
  for (const auto& p : params) {
    if (!p.tensor->has_grad())
      throw std::invalid_argument("adam_step: parameter '" + p.name + "' has no gradient");
    if (p.tensor->grad().size() != p.tensor->size())
      throw DimensionError("adam_step: gradient of '" + p.name + "' has " +
                           std::to_string(p.tensor->grad().size()) + " values, parameter has " +
                           std::to_string(p.tensor->size()));
  }
  state.step += 1;
  const auto& o = state.options;
  const double bc1 = 1.0 - std::pow(o.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, double(state.step));
  const Scalar b1 = Scalar(o.beta1), b2 = Scalar(o.beta2);
  const Scalar step_size = Scalar(o.lr / bc1);
  const Scalar inv_sqrt_bc2 = Scalar(1.0 / std::sqrt(bc2));
  const Scalar eps = Scalar(o.eps);
  for (const auto& p : params) {
    auto& mom = state.moments[p.name];
    const auto& g = p.tensor->grad();
    if (mom.m.size() != g.size()) {
      mom.m = Vector<Scalar>::Zero(g.size());
      mom.v = Vector<Scalar>::Zero(g.size());
    }
    mom.m = b1 * mom.m + (Scalar(1) - b1) * g;
    mom.v = b2 * mom.v + (Scalar(1) - b2) * g.cwiseProduct(g);
    p.tensor->data().array() -=
        step_size * mom.m.array() / (mom.v.array().sqrt() * inv_sqrt_bc2 + eps);
  }
}

template <typename Scalar>
void adam_step(LayerParams<Scalar>& params, AdamState<Scalar>& state,
               const std::string& prefix = "layer") {
  std::vector<NamedTensor<Scalar>> refs;
  params.collect(prefix, refs);
  adam_step<Scalar>(refs, state);
}

}  // namespace sea
