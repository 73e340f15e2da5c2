/*
 * Copyright 2026 The LithoCNN Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// 2-D cross-correlation ("convolution" without kernel flip), zero padding,
// and the matching reverse-mode kernels. Inputs are [C,H,W] or [N,C,H,W];
// kernels are [K,C,F,F].

#pragma once

#include <string>
#include <vector>

#include "lithocnn/tensor.hpp"

namespace lithocnn {

/// Raised when (in - F + 2P) is not a multiple of the stride.
class StrideError : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

struct ConvParams {
  Index kernel_size = 1;
  Index stride = 1;
  Index padding = 0;
  Index in_channels = 1;
  Index out_channels = 1;

  /// Stride-1 parameters whose zero padding preserves the spatial size.
  static ConvParams same(Index in_channels, Index out_channels, Index kernel_size);
};

/// P = (F - 1) / 2; F must be odd.
inline Index same_padding(Index kernel_size) {
  if (kernel_size <= 0 || kernel_size % 2 == 0) {
    throw ParameterError("same padding requires an odd kernel size, got " + std::to_string(kernel_size));
  }
  return (kernel_size - 1) / 2;
}

inline ConvParams ConvParams::same(Index in_channels, Index out_channels, Index kernel_size) {
  return ConvParams{kernel_size, 1, same_padding(kernel_size), in_channels, out_channels};
}

/// out = (in - F + 2P) / stride + 1, rejecting non-integer results.
inline Index output_extent(Index in, Index window, Index padding, Index stride,
                           const char* axis = "spatial") {
  if (window <= 0 || stride <= 0 || padding < 0) {
    throw ParameterError(std::string("invalid window/stride/padding on axis ") + axis);
  }
  const Index span = in + 2 * padding - window;
  if (span < 0) {
    throw DimensionError(std::string("axis ") + axis + ": extent " + std::to_string(in) +
                         " with padding " + std::to_string(padding) + " is smaller than window " +
                         std::to_string(window));
  }
  if (span % stride != 0) {
    throw StrideError(std::string("axis ") + axis + ": non-integer output size (" + std::to_string(in) +
                      " - " + std::to_string(window) + " + 2*" + std::to_string(padding) + ") / " +
                      std::to_string(stride));
  }
  return span / stride + 1;
}

namespace detail {

struct Batch4 {
  Index n, c, h, w;
};

template <typename Scalar>
Batch4 as_batch(const Tensor<Scalar>& t, const char* what) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  throw DimensionError(std::string(what) + " must be [C,H,W] or [N,C,H,W], got " + shape_string(t.shape()));
}

inline Shape with_batch(bool batched, Index n, Index c, Index h, Index w) {
  return batched ? Shape{n, c, h, w} : Shape{c, h, w};
}

template <typename Scalar>
void check_conv_operands(const Tensor<Scalar>& /*input*/, const Tensor<Scalar>& kernels,
                         const Tensor<Scalar>& bias, const ConvParams& p, const Batch4& b) {
  if (kernels.rank() != 4) {
    throw DimensionError("kernels must be [K,C,F,F], got " + shape_string(kernels.shape()));
  }
  if (b.c != p.in_channels) {
    throw DimensionError("channel axis: input has " + std::to_string(b.c) + " channels, params expect " +
                         std::to_string(p.in_channels));
  }
  if (kernels.dim(1) != p.in_channels) {
    throw DimensionError("kernel channel axis: " + std::to_string(kernels.dim(1)) + " != " +
                         std::to_string(p.in_channels));
  }
  if (kernels.dim(0) != p.out_channels) {
    throw DimensionError("kernel output axis: " + std::to_string(kernels.dim(0)) + " != " +
                         std::to_string(p.out_channels));
  }
  if (kernels.dim(2) != p.kernel_size || kernels.dim(3) != p.kernel_size) {
    throw DimensionError("kernel spatial axes " + shape_string(kernels.shape()) + " do not match F=" +
                         std::to_string(p.kernel_size));
  }
  if (bias.size() != p.out_channels) {
    throw DimensionError("bias axis: length " + std::to_string(bias.size()) + " != " +
                         std::to_string(p.out_channels));
  }
}

/// Unfolds one [C,H,W] sample into a row-major [C*F*F, Ho*Wo] patch matrix.
template <typename Scalar>
void im2col(const Scalar* x, Index C, Index H, Index W, const ConvParams& p, Index Ho, Index Wo, Scalar* cols) {
  const Index F = p.kernel_size, S = p.stride, P = p.padding;
  const Index plane = Ho * Wo;
  for (Index c = 0; c < C; ++c) {
    const Scalar* xc = x + c * H * W;
    for (Index ky = 0; ky < F; ++ky) {
      for (Index kx = 0; kx < F; ++kx) {
        Scalar* dst = cols + ((c * F + ky) * F + kx) * plane;
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index iy = oy * S + ky - P;
          Scalar* row = dst + oy * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(row, row + Wo, Scalar(0));
            continue;
          }
          const Scalar* src = xc + iy * W;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index ix = ox * S + kx - P;
            row[ox] = (ix >= 0 && ix < W) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters patch gradients back into a [C,H,W] sample.
template <typename Scalar>
void col2im(const Scalar* cols, Index C, Index H, Index W, const ConvParams& p, Index Ho, Index Wo, Scalar* x) {
  const Index F = p.kernel_size, S = p.stride, P = p.padding;
  const Index plane = Ho * Wo;
  std::fill(x, x + C * H * W, Scalar(0));
  for (Index c = 0; c < C; ++c) {
    Scalar* xc = x + c * H * W;
    for (Index ky = 0; ky < F; ++ky) {
      for (Index kx = 0; kx < F; ++kx) {
        const Scalar* src = cols + ((c * F + ky) * F + kx) * plane;
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index iy = oy * S + ky - P;
          if (iy < 0 || iy >= H) continue;
          Scalar* row = xc + iy * W;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index ix = ox * S + kx - P;
            if (ix >= 0 && ix < W) row[ix] += src[oy * Wo + ox];
          }
        }
      }
    }
  }
}

/// Fixed partition of a batch into reduction chunks, independent of thread count.
inline Index reduction_chunks(Index n) { return std::min<Index>(n, 8); }

}  // namespace detail

/// Zero-pads the two trailing (spatial) axes by `padding` on every side.
template <typename Scalar>
Tensor<Scalar> pad(const Tensor<Scalar>& input, Index padding) {
  if (padding < 0) throw ParameterError("padding must be non-negative");
  if (input.rank() < 2) throw DimensionError("pad needs at least two axes, got " + shape_string(input.shape()));
  if (padding == 0) return input;
  Shape shape = input.shape();
  const Index H = shape[shape.size() - 2], W = shape.back();
  const Index planes = input.size() / (H * W);
  shape[shape.size() - 2] = H + 2 * padding;
  shape.back() = W + 2 * padding;
  const Index Hp = H + 2 * padding, Wp = W + 2 * padding;
  Tensor<Scalar> out(shape);
  for (Index p = 0; p < planes; ++p) {
    for (Index y = 0; y < H; ++y) {
      const Scalar* src = input.data() + (p * H + y) * W;
      std::copy(src, src + W, out.data() + (p * Hp + y + padding) * Wp + padding);
    }
  }
  return out;
}

/// Removes `border` pixels from every side of the two trailing axes.
template <typename Scalar>
Tensor<Scalar> crop(const Tensor<Scalar>& input, Index border) {
  if (border < 0) throw ParameterError("crop border must be non-negative");
  if (input.rank() < 2) throw DimensionError("crop needs at least two axes, got " + shape_string(input.shape()));
  if (border == 0) return input;
  Shape shape = input.shape();
  const Index H = shape[shape.size() - 2], W = shape.back();
  if (H <= 2 * border || W <= 2 * border) {
    throw DimensionError("crop border " + std::to_string(border) + " consumes shape " + shape_string(shape));
  }
  const Index planes = input.size() / (H * W);
  const Index Hc = H - 2 * border, Wc = W - 2 * border;
  shape[shape.size() - 2] = Hc;
  shape.back() = Wc;
  Tensor<Scalar> out(shape);
  for (Index p = 0; p < planes; ++p) {
    for (Index y = 0; y < Hc; ++y) {
      const Scalar* src = input.data() + (p * H + y + border) * W + border;
      std::copy(src, src + Wc, out.data() + (p * Hc + y) * Wc);
    }
  }
  return out;
}

/// Reference cross-correlation: S(i,j) = sum_m sum_n I(i+m, j+n) K(m,n) + b.
template <typename Scalar>
Tensor<Scalar> conv2d_direct(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels,
                             const Tensor<Scalar>& bias, const ConvParams& p) {
  const auto b = detail::as_batch(input, "conv2d input");
  detail::check_conv_operands(input, kernels, bias, p, b);
  const Index Ho = output_extent(b.h, p.kernel_size, p.padding, p.stride, "height");
  const Index Wo = output_extent(b.w, p.kernel_size, p.padding, p.stride, "width");
  const Index F = p.kernel_size, K = p.out_channels;
  Tensor<Scalar> out(detail::with_batch(input.rank() == 4, b.n, K, Ho, Wo));
  for (Index n = 0; n < b.n; ++n) {
    const Scalar* x = input.data() + n * b.c * b.h * b.w;
    for (Index k = 0; k < K; ++k) {
      for (Index oy = 0; oy < Ho; ++oy) {
        for (Index ox = 0; ox < Wo; ++ox) {
          Scalar acc = bias[k];
          for (Index c = 0; c < b.c; ++c) {
            for (Index m = 0; m < F; ++m) {
              const Index iy = oy * p.stride + m - p.padding;
              if (iy < 0 || iy >= b.h) continue;
              for (Index q = 0; q < F; ++q) {
                const Index ix = ox * p.stride + q - p.padding;
                if (ix < 0 || ix >= b.w) continue;
                acc += x[(c * b.h + iy) * b.w + ix] * kernels(k, c, m, q);
              }
            }
          }
          out[((n * K + k) * Ho + oy) * Wo + ox] = acc;
        }
      }
    }
  }
  return out;
}

/// im2col + GEMM cross-correlation; agrees with conv2d_direct to rounding.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels, const Tensor<Scalar>& bias,
                      const ConvParams& p) {
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;
  const auto b = detail::as_batch(input, "conv2d input");
  detail::check_conv_operands(input, kernels, bias, p, b);
  const Index Ho = output_extent(b.h, p.kernel_size, p.padding, p.stride, "height");
  const Index Wo = output_extent(b.w, p.kernel_size, p.padding, p.stride, "width");
  const Index K = p.out_channels, patch = b.c * p.kernel_size * p.kernel_size, plane = Ho * Wo;
  Tensor<Scalar> out(detail::with_batch(input.rank() == 4, b.n, K, Ho, Wo));
  const auto weights = kernels.matrix(K, patch);
  const auto bvec = bias.vector();

#pragma omp parallel
  {
    RowMatrix cols(patch, plane);
#pragma omp for schedule(static)
    for (Index n = 0; n < b.n; ++n) {
      detail::im2col(input.data() + n * b.c * b.h * b.w, b.c, b.h, b.w, p, Ho, Wo, cols.data());
      Eigen::Map<RowMatrix> y(out.data() + n * K * plane, K, plane);
      y.noalias() = weights * cols;
      y.colwise() += bvec;
    }
  }
  return out;
}

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> kernels;
  Tensor<Scalar> bias;
};

/// Gradients of conv2d given dL/d(output).
template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels,
                                  const Tensor<Scalar>& grad_out, const ConvParams& p,
                                  bool input_grad = true) {
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;
  using Vector = typename Tensor<Scalar>::Vector;
  const auto b = detail::as_batch(input, "conv2d input");
  const Index Ho = output_extent(b.h, p.kernel_size, p.padding, p.stride, "height");
  const Index Wo = output_extent(b.w, p.kernel_size, p.padding, p.stride, "width");
  const Index K = p.out_channels, patch = b.c * p.kernel_size * p.kernel_size, plane = Ho * Wo;
  if (grad_out.size() != b.n * K * plane) {
    throw DimensionError("conv2d grad_out " + shape_string(grad_out.shape()) + " does not match output");
  }
  const auto weights = kernels.matrix(K, patch);

  ConvGrads<Scalar> g{input_grad ? Tensor<Scalar>(input.shape()) : Tensor<Scalar>(),
                      Tensor<Scalar>(kernels.shape()), Tensor<Scalar>(Shape{K})};
  const Index chunks = detail::reduction_chunks(b.n);
  std::vector<RowMatrix> dw(static_cast<std::size_t>(chunks), RowMatrix::Zero(K, patch));
  std::vector<Vector> db(static_cast<std::size_t>(chunks), Vector::Zero(K));

#pragma omp parallel
  {
    RowMatrix cols(patch, plane);
    RowMatrix dcols(patch, plane);
#pragma omp for schedule(static)
    for (Index c = 0; c < chunks; ++c) {
      const Index begin = c * b.n / chunks, end = (c + 1) * b.n / chunks;
      for (Index n = begin; n < end; ++n) {
        const Scalar* x = input.data() + n * b.c * b.h * b.w;
        Eigen::Map<const RowMatrix> gy(grad_out.data() + n * K * plane, K, plane);
        detail::im2col(x, b.c, b.h, b.w, p, Ho, Wo, cols.data());
        dw[static_cast<std::size_t>(c)].noalias() += gy * cols.transpose();
        db[static_cast<std::size_t>(c)] += gy.rowwise().sum();
        if (!input_grad) continue;
        dcols.noalias() = weights.transpose() * gy;
        detail::col2im(dcols.data(), b.c, b.h, b.w, p, Ho, Wo, g.input.data() + n * b.c * b.h * b.w);
      }
    }
  }
  auto gw = g.kernels.matrix(K, patch);
  for (Index c = 0; c < chunks; ++c) {
    gw += dw[static_cast<std::size_t>(c)];
    g.bias.vector() += db[static_cast<std::size_t>(c)];
  }
  return g;
}

}  // namespace lithocnn
