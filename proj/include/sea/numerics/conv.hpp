#pragma once

#include "sea/numerics/tensor.hpp"

#include <string>

namespace sea {

struct Conv2dOptions {
  Index stride = 1;
  Index padding = 0;
};

/// Output extent of a cross-correlation along one axis.
inline Index conv_output_extent(Index in, Index kernel, Index stride, Index padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

/// Output extent of a transposed convolution along one axis.
inline Index deconv_output_extent(Index in, Index kernel, Index stride, Index padding) {
  return (in - 1) * stride - 2 * padding + kernel;
}

namespace detail {

struct ConvGeometry {
  Index batch, in_channels, in_h, in_w;
  Index out_channels, out_h, out_w;
  Index kh, kw, stride, padding;
  bool batched;

  Index patch() const { return in_channels * kh * kw; }
  Index out_pixels() const { return out_h * out_w; }
};

// `input` is x of y = conv(x, k); kernel is [out, in, kh, kw].
inline ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, Conv2dOptions o,
                                  const char* op) {
  const std::string name(op);
  if (input.size() != 3 && input.size() != 4)
    throw DimensionError(name + ": input must be [C,H,W] or [N,C,H,W], got " +
                         shape_to_string(input));
  if (kernel.size() != 4)
    throw DimensionError(name + ": kernel must be rank 4, got " + shape_to_string(kernel));
  if (o.stride < 1) throw DimensionError(name + ": stride must be >= 1");
  if (o.padding < 0) throw DimensionError(name + ": padding must be >= 0");
  const bool batched = input.size() == 4;
  const std::size_t off = batched ? 1 : 0;
  ConvGeometry g{};
  g.batched = batched;
  g.batch = batched ? input[0] : 1;
  g.in_channels = input[off];
  g.in_h = input[off + 1];
  g.in_w = input[off + 2];
  g.out_channels = kernel[0];
  g.kh = kernel[2];
  g.kw = kernel[3];
  g.stride = o.stride;
  g.padding = o.padding;
  if (kernel[1] != g.in_channels)
    throw DimensionError(name + ": channel axis mismatch, input has " +
                         std::to_string(g.in_channels) + " channels but kernel expects " +
                         std::to_string(kernel[1]));
  if (g.in_h + 2 * o.padding < g.kh)
    throw DimensionError(name + ": height axis " + std::to_string(g.in_h) + " (padded " +
                         std::to_string(g.in_h + 2 * o.padding) + ") smaller than kernel " +
                         std::to_string(g.kh));
  if (g.in_w + 2 * o.padding < g.kw)
    throw DimensionError(name + ": width axis " + std::to_string(g.in_w) + " (padded " +
                         std::to_string(g.in_w + 2 * o.padding) + ") smaller than kernel " +
                         std::to_string(g.kw));
  g.out_h = conv_output_extent(g.in_h, g.kh, o.stride, o.padding);
  g.out_w = conv_output_extent(g.in_w, g.kw, o.stride, o.padding);
  return g;
}

inline Shape make_shape(bool batched, Index n, Index c, Index h, Index w) {
  return batched ? Shape{n, c, h, w} : Shape{c, h, w};
}

template <typename Scalar>
void im2col(const Scalar* in, const ConvGeometry& g, Scalar* cols) {
  const Index npix = g.out_pixels();
  for (Index c = 0; c < g.in_channels; ++c) {
    const Scalar* plane = in + c * g.in_h * g.in_w;
    for (Index ki = 0; ki < g.kh; ++ki) {
      for (Index kj = 0; kj < g.kw; ++kj) {
        Scalar* row = cols + ((c * g.kh + ki) * g.kw + kj) * npix;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.padding + ki;
          Scalar* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            for (Index ox = 0; ox < g.out_w; ++ox) dst[ox] = Scalar(0);
            continue;
          }
          const Scalar* src = plane + iy * g.in_w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.padding + kj;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

// Scatter-adds patch columns back into an image buffer (the adjoint of im2col).
template <typename Scalar>
void col2im(const Scalar* cols, const ConvGeometry& g, Scalar* out) {
  const Index npix = g.out_pixels();
  for (Index c = 0; c < g.in_channels; ++c) {
    Scalar* plane = out + c * g.in_h * g.in_w;
    for (Index ki = 0; ki < g.kh; ++ki) {
      for (Index kj = 0; kj < g.kw; ++kj) {
        const Scalar* row = cols + ((c * g.kh + ki) * g.kw + kj) * npix;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.padding + ki;
          if (iy < 0 || iy >= g.in_h) continue;
          Scalar* dst = plane + iy * g.in_w;
          const Scalar* src = row + oy * g.out_w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.padding + kj;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void conv_forward_raw(const ConvGeometry& g, const Scalar* input, const Scalar* kernel,
                      Scalar* output) {
  RowMatrix<Scalar> cols(g.patch(), g.out_pixels());
  ConstRowMatrixMap<Scalar> w(kernel, g.out_channels, g.patch());
  const Index in_stride = g.in_channels * g.in_h * g.in_w;
  const Index out_stride = g.out_channels * g.out_pixels();
  for (Index n = 0; n < g.batch; ++n) {
    im2col(input + n * in_stride, g, cols.data());
    RowMatrixMap<Scalar> y(output + n * out_stride, g.out_channels, g.out_pixels());
    y.noalias() = w * cols;
  }
}

// dx += conv^T(dy); dx must be zero-initialised by the caller.
template <typename Scalar>
void conv_backward_input_raw(const ConvGeometry& g, const Scalar* grad_out, const Scalar* kernel,
                             Scalar* grad_in) {
  RowMatrix<Scalar> cols(g.patch(), g.out_pixels());
  ConstRowMatrixMap<Scalar> w(kernel, g.out_channels, g.patch());
  const Index in_stride = g.in_channels * g.in_h * g.in_w;
  const Index out_stride = g.out_channels * g.out_pixels();
  for (Index n = 0; n < g.batch; ++n) {
    ConstRowMatrixMap<Scalar> dy(grad_out + n * out_stride, g.out_channels, g.out_pixels());
    cols.noalias() = w.transpose() * dy;
    col2im(cols.data(), g, grad_in + n * in_stride);
  }
}

// dk += sum_n dy_n * cols(x_n)^T.
template <typename Scalar>
void conv_backward_kernel_raw(const ConvGeometry& g, const Scalar* grad_out, const Scalar* input,
                              Scalar* grad_kernel) {
  RowMatrix<Scalar> cols(g.patch(), g.out_pixels());
  RowMatrixMap<Scalar> dw(grad_kernel, g.out_channels, g.patch());
  const Index in_stride = g.in_channels * g.in_h * g.in_w;
  const Index out_stride = g.out_channels * g.out_pixels();
  for (Index n = 0; n < g.batch; ++n) {
    im2col(input + n * in_stride, g, cols.data());
    ConstRowMatrixMap<Scalar> dy(grad_out + n * out_stride, g.out_channels, g.out_pixels());
    dw.noalias() += dy * cols.transpose();
  }
}

// Geometry of the forward convolution whose input-adjoint is the given
// transposed convolution: the deconv input plays the role of conv output.
inline ConvGeometry deconv_geometry(const Shape& input, const Shape& kernel, Conv2dOptions o,
                                    const char* op) {
  const std::string name(op);
  if (input.size() != 3 && input.size() != 4)
    throw DimensionError(name + ": input must be [C,H,W] or [N,C,H,W], got " +
                         shape_to_string(input));
  if (kernel.size() != 4)
    throw DimensionError(name + ": kernel must be rank 4, got " + shape_to_string(kernel));
  if (o.stride < 1) throw DimensionError(name + ": stride must be >= 1");
  if (o.padding < 0) throw DimensionError(name + ": padding must be >= 0");
  const bool batched = input.size() == 4;
  const std::size_t off = batched ? 1 : 0;
  if (kernel[0] != input[off])
    throw DimensionError(name + ": channel axis mismatch, input has " +
                         std::to_string(input[off]) + " channels but kernel expects " +
                         std::to_string(kernel[0]));
  const Index oh = deconv_output_extent(input[off + 1], kernel[2], o.stride, o.padding);
  const Index ow = deconv_output_extent(input[off + 2], kernel[3], o.stride, o.padding);
  if (oh < 1) throw DimensionError(name + ": height axis output extent would be " +
                                   std::to_string(oh));
  if (ow < 1) throw DimensionError(name + ": width axis output extent would be " +
                                   std::to_string(ow));
  ConvGeometry g{};
  g.batched = batched;
  g.batch = batched ? input[0] : 1;
  g.in_channels = kernel[1];
  g.in_h = oh;
  g.in_w = ow;
  g.out_channels = kernel[0];
  g.out_h = input[off + 1];
  g.out_w = input[off + 2];
  g.kh = kernel[2];
  g.kw = kernel[3];
  g.stride = o.stride;
  g.padding = o.padding;
  return g;
}

}  // namespace detail

/// Cross-correlation. input [N,C_in,H,W] (or unbatched [C_in,H,W]),
/// kernel [C_out,C_in,kh,kw].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                      Conv2dOptions opts = {}) {
  const auto g = detail::conv_geometry(input.shape(), kernel.shape(), opts, "conv2d");
  Tensor<Scalar> out(detail::make_shape(g.batched, g.batch, g.out_channels, g.out_h, g.out_w));
  detail::conv_forward_raw(g, input.ptr(), kernel.ptr(), out.ptr());
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_backward_input(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& kernel,
                                     const Shape& input_shape, Conv2dOptions opts = {}) {
  const auto g = detail::conv_geometry(input_shape, kernel.shape(), opts, "conv2d_backward_input");
  if (grad_out.shape() != detail::make_shape(g.batched, g.batch, g.out_channels, g.out_h, g.out_w))
    throw DimensionError("conv2d_backward_input: grad_out shape " +
                         shape_to_string(grad_out.shape()) + " does not match forward output");
  Tensor<Scalar> dx(input_shape);
  detail::conv_backward_input_raw(g, grad_out.ptr(), kernel.ptr(), dx.ptr());
  return dx;
}

template <typename Scalar>
Tensor<Scalar> conv2d_backward_kernel(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                      const Shape& kernel_shape, Conv2dOptions opts = {}) {
  const auto g = detail::conv_geometry(input.shape(), kernel_shape, opts, "conv2d_backward_kernel");
  if (grad_out.shape() != detail::make_shape(g.batched, g.batch, g.out_channels, g.out_h, g.out_w))
    throw DimensionError("conv2d_backward_kernel: grad_out shape " +
                         shape_to_string(grad_out.shape()) + " does not match forward output");
  Tensor<Scalar> dk(kernel_shape);
  detail::conv_backward_kernel_raw(g, grad_out.ptr(), input.ptr(), dk.ptr());
  return dk;
}

/// Transposed convolution. input [N,C_in,H,W], kernel [C_in,C_out,kh,kw];
/// output extent per axis is (H-1)*stride - 2*padding + k.
template <typename Scalar>
Tensor<Scalar> deconv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                        Conv2dOptions opts = {}) {
  const auto g = detail::deconv_geometry(input.shape(), kernel.shape(), opts, "deconv2d");
  Tensor<Scalar> out(detail::make_shape(g.batched, g.batch, g.in_channels, g.in_h, g.in_w));
  detail::conv_backward_input_raw(g, input.ptr(), kernel.ptr(), out.ptr());
  return out;
}

template <typename Scalar>
Tensor<Scalar> deconv2d_backward_input(const Tensor<Scalar>& grad_out,
                                       const Tensor<Scalar>& kernel, const Shape& input_shape,
                                       Conv2dOptions opts = {}) {
  const auto g =
      detail::deconv_geometry(input_shape, kernel.shape(), opts, "deconv2d_backward_input");
  if (grad_out.shape() != detail::make_shape(g.batched, g.batch, g.in_channels, g.in_h, g.in_w))
    throw DimensionError("deconv2d_backward_input: grad_out shape " +
                         shape_to_string(grad_out.shape()) + " does not match forward output");
  Tensor<Scalar> dx(input_shape);
  detail::conv_forward_raw(g, grad_out.ptr(), kernel.ptr(), dx.ptr());
  return dx;
}

template <typename Scalar>
Tensor<Scalar> deconv2d_backward_kernel(const Tensor<Scalar>& grad_out,
                                        const Tensor<Scalar>& input, const Shape& kernel_shape,
                                        Conv2dOptions opts = {}) {
  const auto g =
      detail::deconv_geometry(input.shape(), kernel_shape, opts, "deconv2d_backward_kernel");
  if (grad_out.shape() != detail::make_shape(g.batched, g.batch, g.in_channels, g.in_h, g.in_w))
    throw DimensionError("deconv2d_backward_kernel: grad_out shape " +
                         shape_to_string(grad_out.shape()) + " does not match forward output");
  Tensor<Scalar> dk(kernel_shape);
  detail::conv_backward_kernel_raw(g, input.ptr(), grad_out.ptr(), dk.ptr());
  return dk;
}

}  // namespace sea
