#pragma once

#include "sea/numerics/params.hpp"
#include "sea/numerics/rng.hpp"
#include "sea/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace sea {

struct FiniteDiffOptions {
  double eps = 1e-5;
  /// Coordinates sampled per tensor; tensors this small or smaller are checked exhaustively.
  Index samples_per_tensor = 32;
  /// Denominator floor so coordinates with (near) zero gradient compare absolutely.
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index coordinates_checked = 0;
};

/// Compares the analytic gradients already stored in each tensor's grad slot
/// with central differences (f(t+e) - f(t-e)) / 2e of `loss` on sampled
/// coordinates. Relative error is |a - n| / max(|a|, |n|, floor).
template <typename LossFn>
FiniteDiffResult finite_diff_check(LossFn&& loss, std::span<const NamedTensor<double>> params,
                                   FiniteDiffOptions opts = {}) {
  if (!(opts.eps >= 1e-7 && opts.eps <= 1e-3))
    throw std::invalid_argument("finite_diff_check: eps must lie in [1e-7, 1e-3]");
  Rng rng(opts.seed);
  FiniteDiffResult result;
  for (const auto& p : params) {
    auto& t = *p.tensor;
    const Vector<double> analytic = t.grad();
    std::vector<Index> coords;
    if (t.size() <= opts.samples_per_tensor) {
      for (Index i = 0; i < t.size(); ++i) coords.push_back(i);
    } else {
      for (Index k = 0; k < opts.samples_per_tensor; ++k)
        coords.push_back(static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(t.size()))));
    }
    for (Index i : coords) {
      const double orig = t[i];
      t[i] = orig + opts.eps;
      const double fp = loss();
      t[i] = orig - opts.eps;
      const double fm = loss();
      t[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::runtime_error("finite_diff_check: non-finite loss at '" + p.name + "'[" +
                                 std::to_string(i) + "]");
      const double numeric = (fp - fm) / (2.0 * opts.eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates_checked;
      if (rel > result.max_rel_error || result.worst_index < 0) {
        if (rel >= result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_param = p.name;
          result.worst_index = i;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace sea
