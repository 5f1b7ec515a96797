#pragma once

#include "sea/numerics/params.hpp"
#include "sea/numerics/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sea {

/// Thrown when batch statistics cannot be formed (fewer than two values per channel).
class DegenerateBatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Batch normalisation over axis 1 of [N,C,...].

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

template <typename Scalar>
LayerParams<Scalar> make_batchnorm_params(Index channels) {
  LayerParams<Scalar> p;
  p.add("gamma", Tensor<Scalar>::constant({channels}, Scalar(1)));
  p.add("beta", Tensor<Scalar>::zeros({channels}));
  p.bn_running_mean = Vector<Scalar>::Zero(channels);
  p.bn_running_var = Vector<Scalar>::Ones(channels);
  return p;
}

template <typename Scalar>
struct BatchNormCache {
  Tensor<Scalar> x_hat;
  Vector<Scalar> inv_std;
  Mode mode = Mode::training;
};

template <typename Scalar>
Tensor<Scalar> batchnorm(const Tensor<Scalar>& x, LayerParams<Scalar>& p,
                         BatchNormCache<Scalar>* cache = nullptr, BatchNormOptions opts = {}) {
  if (x.rank() < 2) throw DimensionError("batchnorm: input must be [N,C,...]");
  const Index n = x.dim(0), c = x.dim(1);
  const Index inner = x.size() / (n * c);
  const auto& gamma = p["gamma"];
  const auto& beta = p["beta"];
  if (gamma.size() != c)
    throw DimensionError("batchnorm: channel axis has " + std::to_string(c) +
                         " channels but parameters hold " + std::to_string(gamma.size()));
  const Index count = n * inner;
  Vector<Scalar> mean(c), var(c);
  if (p.mode == Mode::training) {
    if (count < 2)
      throw DegenerateBatchError("batchnorm: degenerate batch, " + std::to_string(count) +
                                 " value per channel in training mode");
    mean.setZero();
    var.setZero();
    for (Index b = 0; b < n; ++b)
      for (Index ch = 0; ch < c; ++ch) {
        const Scalar* src = x.ptr() + (b * c + ch) * inner;
        for (Index i = 0; i < inner; ++i) mean[ch] += src[i];
      }
    mean /= Scalar(count);
    for (Index b = 0; b < n; ++b)
      for (Index ch = 0; ch < c; ++ch) {
        const Scalar* src = x.ptr() + (b * c + ch) * inner;
        for (Index i = 0; i < inner; ++i) {
          const Scalar d = src[i] - mean[ch];
          var[ch] += d * d;
        }
      }
    var /= Scalar(count);
    const Scalar m = Scalar(opts.momentum);
    const Scalar unbias = Scalar(count) / Scalar(count - 1);
    p.bn_running_mean = (Scalar(1) - m) * p.bn_running_mean + m * mean;
    p.bn_running_var = (Scalar(1) - m) * p.bn_running_var + m * unbias * var;
  } else {
    mean = p.bn_running_mean;
    var = p.bn_running_var;
  }
  Vector<Scalar> inv_std(c);
  for (Index ch = 0; ch < c; ++ch) inv_std[ch] = Scalar(1) / std::sqrt(var[ch] + Scalar(opts.eps));

  Tensor<Scalar> y(x.shape());
  Tensor<Scalar> x_hat;
  if (cache) x_hat = Tensor<Scalar>(x.shape());
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch) {
      const Index base = (b * c + ch) * inner;
      const Scalar g = gamma[ch], s = beta[ch], mu = mean[ch], is = inv_std[ch];
      for (Index i = 0; i < inner; ++i) {
        const Scalar xh = (x[base + i] - mu) * is;
        if (cache) x_hat[base + i] = xh;
        y[base + i] = g * xh + s;
      }
    }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->mode = p.mode;
  }
  return y;
}

/// Accumulates gamma/beta gradients into `p` and returns dL/dx.
template <typename Scalar>
Tensor<Scalar> batchnorm_backward(const Tensor<Scalar>& dy, const BatchNormCache<Scalar>& cache,
                                  LayerParams<Scalar>& p) {
  const Index n = dy.dim(0), c = dy.dim(1);
  const Index inner = dy.size() / (n * c);
  const Index count = n * inner;
  auto& gamma = p["gamma"];
  auto& dgamma = gamma.grad();
  auto& dbeta = p["beta"].grad();
  Vector<Scalar> sum_dy = Vector<Scalar>::Zero(c), sum_dy_xhat = Vector<Scalar>::Zero(c);
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch) {
      const Index base = (b * c + ch) * inner;
      for (Index i = 0; i < inner; ++i) {
        sum_dy[ch] += dy[base + i];
        sum_dy_xhat[ch] += dy[base + i] * cache.x_hat[base + i];
      }
    }
  dgamma += sum_dy_xhat;
  dbeta += sum_dy;
  Tensor<Scalar> dx(dy.shape());
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch) {
      const Index base = (b * c + ch) * inner;
      const Scalar k = gamma[ch] * cache.inv_std[ch];
      if (cache.mode == Mode::inference) {
        for (Index i = 0; i < inner; ++i) dx[base + i] = k * dy[base + i];
      } else {
        const Scalar mdy = sum_dy[ch] / Scalar(count);
        const Scalar mdx = sum_dy_xhat[ch] / Scalar(count);
        for (Index i = 0; i < inner; ++i)
          dx[base + i] = k * (dy[base + i] - mdy - cache.x_hat[base + i] * mdx);
      }
    }
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.data().cwiseMax(Scalar(0)));
}

/// dL/dx given the forward *output* y = relu(x).
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& dy, const Tensor<Scalar>& y) {
  return Tensor<Scalar>(dy.shape(),
                        (y.data().array() > Scalar(0)).select(dy.data(), Scalar(0)).matrix());
}

// ---------------------------------------------------------------------------
// Dense: y = x W^T + b, x [N,in], W [out,in].

template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& x, const LayerParams<Scalar>& p) {
  const auto& w = p["weight"];
  const auto& b = p["bias"];
  const Index n = x.dim(0), in = x.size() / n, out = w.dim(0);
  if (w.dim(1) != in)
    throw DimensionError("dense: feature axis has " + std::to_string(in) +
                         " values but weight expects " + std::to_string(w.dim(1)));
  Tensor<Scalar> y({n, out});
  auto ym = y.as_matrix(n);
  ym.noalias() = x.as_matrix(n) * w.as_matrix(out).transpose();
  ym.rowwise() += b.data().transpose();
  return y;
}

template <typename Scalar>
Tensor<Scalar> dense_backward(const Tensor<Scalar>& dy, const Tensor<Scalar>& x,
                              LayerParams<Scalar>& p) {
  auto& w = p["weight"];
  auto& b = p["bias"];
  const Index n = x.dim(0), out = w.dim(0), in = w.dim(1);
  RowMatrixMap<Scalar> dw(w.grad().data(), out, in);
  dw.noalias() += dy.as_matrix(n).transpose() * x.as_matrix(n);
  b.grad() += dy.as_matrix(n).colwise().sum().transpose();
  Tensor<Scalar> dx(x.shape());
  dx.as_matrix(n).noalias() = dy.as_matrix(n) * w.as_matrix(out);
  return dx;
}

// ---------------------------------------------------------------------------
// GRU cell, used non-recurrently by the gate.
//   z  = sigmoid(x Wz^T + h Uz^T + bz)
//   r  = sigmoid(x Wr^T + h Ur^T + br)
//   h~ = tanh(x Wh^T + (r*h) Uh^T + bh)
//   h' = (1 - z) * h + z * h~

template <typename Scalar>
LayerParams<Scalar> make_gru_params(Index input_size, Index hidden_size) {
  LayerParams<Scalar> p;
  for (const char* g : {"z", "r", "h"}) {
    p.add(std::string("w_") + g, Tensor<Scalar>::zeros({hidden_size, input_size}));
    p.add(std::string("u_") + g, Tensor<Scalar>::zeros({hidden_size, hidden_size}));
    p.add(std::string("b_") + g, Tensor<Scalar>::zeros({hidden_size}));
  }
  return p;
}

template <typename Scalar>
struct GruCache {
  RowMatrix<Scalar> x, h, z, r, candidate;
};

template <typename Scalar>
Tensor<Scalar> gru_cell(const Tensor<Scalar>& x, const Tensor<Scalar>& h_prev,
                        const LayerParams<Scalar>& p, GruCache<Scalar>* cache = nullptr) {
  const auto& wz = p["w_z"];
  const Index hidden = wz.dim(0), input = wz.dim(1);
  const Index n = x.rank() == 1 ? 1 : x.dim(0);
  if (x.size() != n * input)
    throw DimensionError("gru_cell: input axis has " + std::to_string(x.size() / n) +
                         " features but weights expect " + std::to_string(input));
  if (h_prev.size() != n * hidden)
    throw DimensionError("gru_cell: hidden axis has " + std::to_string(h_prev.size() / n) +
                         " units but weights expect " + std::to_string(hidden));
  auto xm = x.as_matrix(n);
  auto hm = h_prev.as_matrix(n);
  auto gate = [&](const char* g) {
    RowMatrix<Scalar> a = xm * p[std::string("w_") + g].as_matrix(hidden).transpose();
    a.noalias() += hm * p[std::string("u_") + g].as_matrix(hidden).transpose();
    a.rowwise() += p[std::string("b_") + g].data().transpose();
    return a;
  };
  auto sigmoid = [](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); };
  RowMatrix<Scalar> z = gate("z").unaryExpr(sigmoid);
  RowMatrix<Scalar> r = gate("r").unaryExpr(sigmoid);
  RowMatrix<Scalar> rh = r.cwiseProduct(hm);
  RowMatrix<Scalar> a_h = xm * p["w_h"].as_matrix(hidden).transpose();
  a_h.noalias() += rh * p["u_h"].as_matrix(hidden).transpose();
  a_h.rowwise() += p["b_h"].data().transpose();
  RowMatrix<Scalar> cand = a_h.array().tanh().matrix();
  Tensor<Scalar> out(h_prev.shape());
  auto om = out.as_matrix(n);
  om = (RowMatrix<Scalar>::Ones(n, hidden) - z).cwiseProduct(hm) + z.cwiseProduct(cand);
  if (cache) {
    cache->x = xm;
    cache->h = hm;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->candidate = std::move(cand);
  }
  return out;
}

template <typename Scalar>
struct GruGrads {
  Tensor<Scalar> dx;
  Tensor<Scalar> dh_prev;
};

/// Accumulates weight gradients into `p`; returns input and hidden gradients.
template <typename Scalar>
GruGrads<Scalar> gru_cell_backward(const Tensor<Scalar>& dh_next, const GruCache<Scalar>& c,
                                   LayerParams<Scalar>& p, const Shape& x_shape,
                                   const Shape& h_shape) {
  const Index n = c.x.rows(), hidden = c.z.cols(), input = c.x.cols();
  auto dh = dh_next.as_matrix(n);
  const auto ones = RowMatrix<Scalar>::Ones(n, hidden);
  RowMatrix<Scalar> dz = dh.cwiseProduct(c.candidate - c.h);
  RowMatrix<Scalar> dcand = dh.cwiseProduct(c.z);
  RowMatrix<Scalar> da_h = dcand.cwiseProduct(ones - c.candidate.cwiseProduct(c.candidate));
  RowMatrix<Scalar> rh = c.r.cwiseProduct(c.h);
  RowMatrix<Scalar> d_rh = da_h * p["u_h"].as_matrix(hidden);
  RowMatrix<Scalar> dr = d_rh.cwiseProduct(c.h);
  RowMatrix<Scalar> da_z = dz.cwiseProduct(c.z.cwiseProduct(ones - c.z));
  RowMatrix<Scalar> da_r = dr.cwiseProduct(c.r.cwiseProduct(ones - c.r));

  auto accumulate = [&](const char* g, const RowMatrix<Scalar>& da, const RowMatrix<Scalar>& hin) {
    RowMatrixMap<Scalar>(p[std::string("w_") + g].grad().data(), hidden, input).noalias() +=
        da.transpose() * c.x;
    RowMatrixMap<Scalar>(p[std::string("u_") + g].grad().data(), hidden, hidden).noalias() +=
        da.transpose() * hin;
    p[std::string("b_") + g].grad() += da.colwise().sum().transpose();
  };
  accumulate("z", da_z, c.h);
  accumulate("r", da_r, c.h);
  accumulate("h", da_h, rh);

  GruGrads<Scalar> g{Tensor<Scalar>(x_shape), Tensor<Scalar>(h_shape)};
  auto dx = g.dx.as_matrix(n);
  dx.noalias() = da_z * p["w_z"].as_matrix(hidden);
  dx.noalias() += da_r * p["w_r"].as_matrix(hidden);
  dx.noalias() += da_h * p["w_h"].as_matrix(hidden);
  auto dhp = g.dh_prev.as_matrix(n);
  dhp = dh.cwiseProduct(ones - c.z) + d_rh.cwiseProduct(c.r);
  dhp.noalias() += da_z * p["u_z"].as_matrix(hidden);
  dhp.noalias() += da_r * p["u_r"].as_matrix(hidden);
  return g;
}

}  // namespace sea
