#pragma once

#include "sea/numerics.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace sea::test {

template <typename Scalar = double>
Tensor<Scalar> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(rng.uniform(lo, hi));
  return t;
}

/// Direct six-loop cross-correlation over an unbatched [C,H,W] input.
inline Tensor<double> reference_conv(const Tensor<double>& x, const Tensor<double>& k, Index stride,
                                     Index pad) {
  const Index ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Index co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const Index oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  Tensor<double> y({co, oh, ow});
  for (Index o = 0; o < co; ++o)
    for (Index oy = 0; oy < oh; ++oy)
      for (Index ox = 0; ox < ow; ++ox) {
        double s = 0;
        for (Index c = 0; c < ci; ++c)
          for (Index i = 0; i < kh; ++i)
            for (Index j = 0; j < kw; ++j) {
              const Index iy = oy * stride - pad + i, ix = ox * stride - pad + j;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              s += x[(c * h + iy) * w + ix] * k[((o * ci + c) * kh + i) * kw + j];
            }
        y[(o * oh + oy) * ow + ox] = s;
      }
  return y;
}

/// Transposed convolution as a scatter of kernel copies scaled by each input value.
inline Tensor<double> reference_deconv(const Tensor<double>& x, const Tensor<double>& k,
                                       Index stride, Index pad) {
  const Index ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Index co = k.dim(1), kh = k.dim(2), kw = k.dim(3);
  const Index oh = (h - 1) * stride - 2 * pad + kh, ow = (w - 1) * stride - 2 * pad + kw;
  Tensor<double> y({co, oh, ow});
  for (Index c = 0; c < ci; ++c)
    for (Index iy = 0; iy < h; ++iy)
      for (Index ix = 0; ix < w; ++ix) {
        const double v = x[(c * h + iy) * w + ix];
        for (Index o = 0; o < co; ++o)
          for (Index i = 0; i < kh; ++i)
            for (Index j = 0; j < kw; ++j) {
              const Index oy = iy * stride - pad + i, ox = ix * stride - pad + j;
              if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
              y[(o * oh + oy) * ow + ox] += v * k[((c * co + o) * kh + i) * kw + j];
            }
      }
  return y;
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sea_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace sea::test
