#pragma once

#include "sea/gaze_map.hpp"
#include "sea/numerics/tensor.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace sea {

/// Thrown when a distribution argument does not sum to one.
class NormalizationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kKlClamp = 1e-10;
inline constexpr double kKlSumTolerance = 1e-4;

/// Row-wise numerically stable softmax of an [N,K] matrix.
template <typename Derived>
RowMatrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// Softmax over every cell of a 2-D logit grid.
template <typename Scalar>
GazeMap<Scalar> softmax2d(const typename GazeMap<Scalar>::Array& logits) {
  typename GazeMap<Scalar>::Array e = (logits - logits.maxCoeff()).exp();
  e /= e.sum();
  return GazeMap<Scalar>(std::move(e), true);
}

/// KL(p || q) = sum p log(p / q) with q clamped below at 1e-10.
template <typename Scalar>
double kl_divergence(const GazeMap<Scalar>& p, const GazeMap<Scalar>& q) {
  if (p.height() != q.height() || p.width() != q.width())
    throw DimensionError("kl_divergence: map extents differ");
  const double sp = static_cast<double>(p.sum()), sq = static_cast<double>(q.sum());
  if (std::abs(sp - 1.0) > kKlSumTolerance)
    throw NormalizationError("kl_divergence: target sums to " + std::to_string(sp));
  if (std::abs(sq - 1.0) > kKlSumTolerance)
    throw NormalizationError("kl_divergence: prediction sums to " + std::to_string(sq));
  double kl = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double pi = static_cast<double>(p.values.data()[i]);
    if (pi <= 0.0) continue;
    const double qi = std::max(static_cast<double>(q.values.data()[i]), kKlClamp);
    kl += pi * std::log(pi / qi);
  }
  return kl;
}

template <typename Scalar>
struct LossResult {
  Scalar loss;
  RowMatrix<Scalar> grad;  // d(mean loss)/d(logits)
};

/// Mean over rows of KL(target || softmax(logits)); gradient w.r.t. logits.
template <typename Scalar>
LossResult<Scalar> kl_softmax_loss(const RowMatrix<Scalar>& target,
                                   const RowMatrix<Scalar>& logits) {
  if (target.rows() != logits.rows() || target.cols() != logits.cols())
    throw DimensionError("kl_softmax_loss: target and logits shapes differ");
  const Index n = logits.rows();
  RowMatrix<Scalar> q = softmax_rows(logits);
  LossResult<Scalar> r{Scalar(0), RowMatrix<Scalar>(n, logits.cols())};
  const Scalar clamp = Scalar(kKlClamp);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double s = static_cast<double>(target.row(i).sum());
    if (std::abs(s - 1.0) > kKlSumTolerance)
      throw NormalizationError("kl_softmax_loss: target row " + std::to_string(i) + " sums to " +
                               std::to_string(s));
    // g_j = dKL/dq_j; dlogit_i = q_i (g_i - sum_j g_j q_j)
    Scalar gq = 0;
    for (Index j = 0; j < logits.cols(); ++j) {
      const Scalar p = target(i, j);
      const Scalar qj = q(i, j);
      Scalar g = 0;
      if (p > 0) {
        const Scalar qc = qj > clamp ? qj : clamp;
        total += static_cast<double>(p * std::log(p / qc));
        if (qj > clamp) g = -p / qj;
      }
      r.grad(i, j) = g;
      gq += g * qj;
    }
    for (Index j = 0; j < logits.cols(); ++j) r.grad(i, j) = q(i, j) * (r.grad(i, j) - gq);
  }
  r.loss = Scalar(total / double(n));
  r.grad /= Scalar(n);
  return r;
}

/// -log softmax(logits)[label] for one logit vector.
template <typename Scalar>
double cross_entropy(const Vector<Scalar>& logits, Index label) {
  if (label < 0 || label >= logits.size())
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                            " outside [0," + std::to_string(logits.size()) + ")");
  const double m = static_cast<double>(logits.maxCoeff());
  double s = 0.0;
  for (Index i = 0; i < logits.size(); ++i) s += std::exp(static_cast<double>(logits[i]) - m);
  return -(static_cast<double>(logits[label]) - m - std::log(s));
}

/// Mean cross-entropy over rows of [N,A] logits; gradient w.r.t. logits.
template <typename Scalar>
LossResult<Scalar> cross_entropy_loss(const RowMatrix<Scalar>& logits, std::span<const int> labels) {
  const Index n = logits.rows();
  if (static_cast<Index>(labels.size()) != n)
    throw DimensionError("cross_entropy_loss: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  RowMatrix<Scalar> q = softmax_rows(logits);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols())
      throw std::out_of_range("cross_entropy_loss: label " + std::to_string(y) + " in row " +
                              std::to_string(i) + " outside [0," +
                              std::to_string(logits.cols()) + ")");
    const Scalar m = logits.row(i).maxCoeff();
    const double lse = static_cast<double>(m) +
                       std::log(static_cast<double>((logits.row(i).array() - m).exp().sum()));
    total += lse - static_cast<double>(logits(i, y));
    q(i, y) -= Scalar(1);
  }
  return {Scalar(total / double(n)), q / Scalar(n)};
}

}  // namespace sea
