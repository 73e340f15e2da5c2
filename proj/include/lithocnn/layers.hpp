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

// Forward and backward kernels for the non-convolutional layers.

#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lithocnn/conv.hpp"
#include "lithocnn/rng.hpp"
#include "lithocnn/tensor.hpp"

namespace lithocnn {

// ---------------------------------------------------------------- activation

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  Tensor<Scalar> out = input;
  out.vector() = out.vector().cwiseMax(Scalar(0));
  return out;
}

/// d relu / dx is 1 for x > 0 and 0 otherwise (0 at the kink).
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_out) {
  Tensor<Scalar> g = grad_out;
  g.vector() = (input.vector().array() > Scalar(0)).select(grad_out.vector(), Scalar(0));
  return g;
}

// ------------------------------------------------------------------- pooling

namespace detail {

struct Planes {
  Index planes, h, w;
};

template <typename Scalar>
Planes as_planes(const Tensor<Scalar>& t, const char* what) {
  if (t.rank() < 2) throw DimensionError(std::string(what) + " needs spatial axes, got " + shape_string(t.shape()));
  const Index h = t.dim(-2), w = t.dim(-1);
  return {t.size() / (h * w), h, w};
}

inline Shape pooled_shape(Shape shape, Index ho, Index wo) {
  shape[shape.size() - 2] = ho;
  shape.back() = wo;
  return shape;
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> max_pool(const Tensor<Scalar>& input, Index window, Index stride) {
  const auto g = detail::as_planes(input, "max_pool");
  const Index ho = output_extent(g.h, window, 0, stride, "height");
  const Index wo = output_extent(g.w, window, 0, stride, "width");
  Tensor<Scalar> out(detail::pooled_shape(input.shape(), ho, wo));
  for (Index p = 0; p < g.planes; ++p) {
    const Scalar* x = input.data() + p * g.h * g.w;
    Scalar* y = out.data() + p * ho * wo;
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        for (Index m = 0; m < window; ++m) {
          const Scalar* row = x + (oy * stride + m) * g.w + ox * stride;
          for (Index q = 0; q < window; ++q) best = std::max(best, row[q]);
        }
        y[oy * wo + ox] = best;
      }
    }
  }
  return out;
}

/// Routes each output gradient to the first maximal element of its window.
template <typename Scalar>
Tensor<Scalar> max_pool_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_out, Index window,
                                 Index stride) {
  const auto g = detail::as_planes(input, "max_pool");
  const Index ho = output_extent(g.h, window, 0, stride, "height");
  const Index wo = output_extent(g.w, window, 0, stride, "width");
  Tensor<Scalar> dx(input.shape());
  for (Index p = 0; p < g.planes; ++p) {
    const Scalar* x = input.data() + p * g.h * g.w;
    const Scalar* gy = grad_out.data() + p * ho * wo;
    Scalar* gx = dx.data() + p * g.h * g.w;
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        Index arg = (oy * stride) * g.w + ox * stride;
        for (Index m = 0; m < window; ++m) {
          for (Index q = 0; q < window; ++q) {
            const Index at = (oy * stride + m) * g.w + ox * stride + q;
            if (x[at] > x[arg]) arg = at;
          }
        }
        gx[arg] += gy[oy * wo + ox];
      }
    }
  }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> avg_pool(const Tensor<Scalar>& input, Index window, Index stride) {
  const auto g = detail::as_planes(input, "avg_pool");
  const Index ho = output_extent(g.h, window, 0, stride, "height");
  const Index wo = output_extent(g.w, window, 0, stride, "width");
  Tensor<Scalar> out(detail::pooled_shape(input.shape(), ho, wo));
  const Scalar scale = Scalar(1) / static_cast<Scalar>(window * window);
  for (Index p = 0; p < g.planes; ++p) {
    const Scalar* x = input.data() + p * g.h * g.w;
    Scalar* y = out.data() + p * ho * wo;
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        Scalar acc = 0;
        for (Index m = 0; m < window; ++m) {
          const Scalar* row = x + (oy * stride + m) * g.w + ox * stride;
          for (Index q = 0; q < window; ++q) acc += row[q];
        }
        y[oy * wo + ox] = acc * scale;
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> avg_pool_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_out, Index window,
                                 Index stride) {
  const auto g = detail::as_planes(input, "avg_pool");
  const Index ho = output_extent(g.h, window, 0, stride, "height");
  const Index wo = output_extent(g.w, window, 0, stride, "width");
  Tensor<Scalar> dx(input.shape());
  const Scalar scale = Scalar(1) / static_cast<Scalar>(window * window);
  for (Index p = 0; p < g.planes; ++p) {
    const Scalar* gy = grad_out.data() + p * ho * wo;
    Scalar* gx = dx.data() + p * g.h * g.w;
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        const Scalar v = gy[oy * wo + ox] * scale;
        for (Index m = 0; m < window; ++m) {
          Scalar* row = gx + (oy * stride + m) * g.w + ox * stride;
          for (Index q = 0; q < window; ++q) row[q] += v;
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------------- dropout

/// Inverted-dropout mask: 0 with probability `rate`, 1/(1-rate) otherwise.
template <typename Scalar>
Tensor<Scalar> dropout_mask(const Shape& shape, double rate, RngHandle rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - rate));
  Tensor<Scalar> mask(shape);
  for (Scalar& m : mask.values()) m = rng.uniform() < rate ? Scalar(0) : keep;
  return mask;
}

template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& input, double rate, RngHandle rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return input;
  Tensor<Scalar> out = dropout_mask<Scalar>(input.shape(), rate, rng);
  out.vector().array() *= input.vector().array();
  return out;
}

// --------------------------------------------------------------------- dense

namespace detail {

template <typename Scalar>
std::pair<Index, Index> rows_features(const Tensor<Scalar>& input) {
  if (input.rank() == 1) return {1, input.size()};
  return {input.dim(0), input.size() / input.dim(0)};
}

}  // namespace detail

/// y = W x + b. A rank-1 input is one sample; higher ranks flatten all but axis 0.
template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias) {
  if (weights.rank() != 2) throw DimensionError("dense weights must be [m,n], got " + shape_string(weights.shape()));
  const auto [rows, n] = detail::rows_features(input);
  const Index m = weights.dim(0);
  if (weights.dim(1) != n) {
    throw DimensionError("dense input axis: " + std::to_string(n) + " features, weights expect " +
                         std::to_string(weights.dim(1)));
  }
  if (bias.size() != m) {
    throw DimensionError("dense bias axis: length " + std::to_string(bias.size()) + " != " + std::to_string(m));
  }
  Tensor<Scalar> out(input.rank() == 1 ? Shape{m} : Shape{rows, m});
  auto y = out.matrix(rows, m);
  y.noalias() = input.matrix(rows, n) * weights.matrix(m, n).transpose();
  y.rowwise() += bias.vector().transpose();
  return out;
}

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                                  const Tensor<Scalar>& grad_out) {
  const auto [rows, n] = detail::rows_features(input);
  const Index m = weights.dim(0);
  DenseGrads<Scalar> g{Tensor<Scalar>(input.shape()), Tensor<Scalar>(weights.shape()), Tensor<Scalar>(Shape{m})};
  const auto gy = grad_out.matrix(rows, m);
  g.input.matrix(rows, n).noalias() = gy * weights.matrix(m, n);
  g.weights.matrix(m, n).noalias() = gy.transpose() * input.matrix(rows, n);
  g.bias.vector() = gy.colwise().sum().transpose();
  return g;
}

// ---------------------------------------------------------------- batch norm

struct BatchNormConfig {
  double epsilon = 1e-5;
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
};

/// Per-channel statistics of the last training batch, needed by the backward pass.
template <typename Scalar>
struct BatchNormCache {
  std::vector<double> mean;
  std::vector<double> inv_std;
  bool training = true;
};

namespace detail {

struct ChannelLayout {
  Index batch, channels, spatial;
};

template <typename Scalar>
ChannelLayout channel_layout(const Tensor<Scalar>& x) {
  if (x.rank() < 2) throw DimensionError("batch_norm input must be [B,C,...], got " + shape_string(x.shape()));
  return {x.dim(0), x.dim(1), x.size() / (x.dim(0) * x.dim(1))};
}

}  // namespace detail

/// Normalizes each channel over (batch, spatial). In training mode uses batch
/// statistics and updates the running ones; otherwise uses the running ones.
template <typename Scalar>
Tensor<Scalar> batch_norm(const Tensor<Scalar>& input, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                          Tensor<Scalar>& running_mean, Tensor<Scalar>& running_var, bool training,
                          BatchNormCache<Scalar>* cache = nullptr, const BatchNormConfig& cfg = {}) {
  const auto L = detail::channel_layout(input);
  if (gamma.size() != L.channels || beta.size() != L.channels || running_mean.size() != L.channels ||
      running_var.size() != L.channels) {
    throw DimensionError("batch_norm channel axis: input has " + std::to_string(L.channels) +
                         " channels, parameters have " + std::to_string(gamma.size()));
  }
  if (training && L.batch < 2) {
    throw ParameterError("batch_norm: degenerate batch of size 1 in training mode");
  }
  const auto C = static_cast<std::size_t>(L.channels);
  std::vector<double> mean(C), inv_std(C);
  if (training) {
    const double count = static_cast<double>(L.batch * L.spatial);
    for (Index c = 0; c < L.channels; ++c) {
      double sum = 0, sq = 0;
      for (Index b = 0; b < L.batch; ++b) {
        const Scalar* x = input.data() + (b * L.channels + c) * L.spatial;
        for (Index s = 0; s < L.spatial; ++s) sum += x[s];
      }
      const double mu = sum / count;
      for (Index b = 0; b < L.batch; ++b) {
        const Scalar* x = input.data() + (b * L.channels + c) * L.spatial;
        for (Index s = 0; s < L.spatial; ++s) sq += (x[s] - mu) * (x[s] - mu);
      }
      const double var = sq / count;
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + cfg.epsilon);
      running_mean[c] = static_cast<Scalar>(cfg.momentum * running_mean[c] + (1.0 - cfg.momentum) * mu);
      running_var[c] = static_cast<Scalar>(cfg.momentum * running_var[c] + (1.0 - cfg.momentum) * var);
    }
  } else {
    for (Index c = 0; c < L.channels; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + cfg.epsilon);
    }
  }
  Tensor<Scalar> out(input.shape());
  for (Index b = 0; b < L.batch; ++b) {
    for (Index c = 0; c < L.channels; ++c) {
      const Index base = (b * L.channels + c) * L.spatial;
      for (Index s = 0; s < L.spatial; ++s) {
        out[base + s] = static_cast<Scalar>((input[base + s] - mean[c]) * inv_std[c] * gamma[c] + beta[c]);
      }
    }
  }
  if (cache) {
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
    cache->training = training;
  }
  return out;
}

template <typename Scalar>
struct BatchNormGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
};

template <typename Scalar>
BatchNormGrads<Scalar> batch_norm_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& gamma,
                                           const BatchNormCache<Scalar>& cache, const Tensor<Scalar>& grad_out) {
  const auto L = detail::channel_layout(input);
  BatchNormGrads<Scalar> g{Tensor<Scalar>(input.shape()), Tensor<Scalar>(gamma.shape()),
                           Tensor<Scalar>(gamma.shape())};
  const double count = static_cast<double>(L.batch * L.spatial);
  for (Index c = 0; c < L.channels; ++c) {
    const double mu = cache.mean[c], is = cache.inv_std[c];
    double sum_dy = 0, sum_dy_xhat = 0;
    for (Index b = 0; b < L.batch; ++b) {
      const Index base = (b * L.channels + c) * L.spatial;
      for (Index s = 0; s < L.spatial; ++s) {
        const double dy = grad_out[base + s];
        sum_dy += dy;
        sum_dy_xhat += dy * (input[base + s] - mu) * is;
      }
    }
    g.gamma[c] = static_cast<Scalar>(sum_dy_xhat);
    g.beta[c] = static_cast<Scalar>(sum_dy);
    const double gm = gamma[c];
    for (Index b = 0; b < L.batch; ++b) {
      const Index base = (b * L.channels + c) * L.spatial;
      for (Index s = 0; s < L.spatial; ++s) {
        const double dy = grad_out[base + s];
        if (cache.training) {
          const double xhat = (input[base + s] - mu) * is;
          g.input[base + s] =
              static_cast<Scalar>(gm * is * (dy - sum_dy / count - xhat * sum_dy_xhat / count));
        } else {
          g.input[base + s] = static_cast<Scalar>(gm * is * dy);
        }
      }
    }
  }
  return g;
}

// ------------------------------------------------------------------- softmax

/// Softmax over the last axis with max subtraction.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  const Index k = logits.dim(-1), rows = logits.size() / k;
  Tensor<Scalar> out(logits.shape());
  for (Index r = 0; r < rows; ++r) {
    const Scalar* x = logits.data() + r * k;
    Scalar* y = out.data() + r * k;
    const Scalar mx = *std::max_element(x, x + k);
    double sum = 0;
    for (Index i = 0; i < k; ++i) sum += std::exp(static_cast<double>(x[i] - mx));
    for (Index i = 0; i < k; ++i) y[i] = static_cast<Scalar>(std::exp(static_cast<double>(x[i] - mx)) / sum);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> softmax_backward(const Tensor<Scalar>& probs, const Tensor<Scalar>& grad_out) {
  const Index k = probs.dim(-1), rows = probs.size() / k;
  Tensor<Scalar> g(probs.shape());
  for (Index r = 0; r < rows; ++r) {
    const Scalar* p = probs.data() + r * k;
    const Scalar* gy = grad_out.data() + r * k;
    double dot = 0;
    for (Index i = 0; i < k; ++i) dot += static_cast<double>(p[i]) * gy[i];
    for (Index i = 0; i < k; ++i) g[r * k + i] = static_cast<Scalar>(p[i] * (gy[i] - dot));
  }
  return g;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(p[label]) with p floored at 1e-12.
template <typename Scalar>
double cross_entropy_loss(const Tensor<Scalar>& probs, Index label) {
  const Index k = probs.dim(-1);
  if (probs.size() != k) throw DimensionError("cross_entropy_loss expects a single probability row");
  if (label < 0 || label >= k) {
    throw ParameterError("label " + std::to_string(label) + " out of range for " + std::to_string(k) + " classes");
  }
  return -std::log(std::max(static_cast<double>(probs[label]), kProbabilityFloor));
}

/// Mean cross-entropy over rows of softmax(logits).
template <typename Scalar>
double softmax_cross_entropy(const Tensor<Scalar>& logits, std::span<const Index> labels, Tensor<Scalar>* probs_out) {
  const Index k = logits.dim(-1), rows = logits.size() / k;
  if (static_cast<Index>(labels.size()) != rows) {
    throw DimensionError("label count " + std::to_string(labels.size()) + " != batch " + std::to_string(rows));
  }
  Tensor<Scalar> probs = softmax(logits);
  double loss = 0;
  for (Index r = 0; r < rows; ++r) {
    const Index y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= k) throw ParameterError("label " + std::to_string(y) + " out of range");
    loss -= std::log(std::max(static_cast<double>(probs[r * k + y]), kProbabilityFloor));
  }
  if (probs_out) *probs_out = std::move(probs);
  return loss / static_cast<double>(rows);
}

/// d(mean CE)/d(logits) = (p - onehot) / rows.
template <typename Scalar>
Tensor<Scalar> softmax_cross_entropy_backward(const Tensor<Scalar>& probs, std::span<const Index> labels,
                                              double grad_loss = 1.0) {
  const Index k = probs.dim(-1), rows = probs.size() / k;
  Tensor<Scalar> g = probs;
  for (Index r = 0; r < rows; ++r) g[r * k + labels[static_cast<std::size_t>(r)]] -= Scalar(1);
  g.vector() *= static_cast<Scalar>(grad_loss / static_cast<double>(rows));
  return g;
}

// -------------------------------------------------------------- composition

/// Concatenates [N,C_i,H,W] (or [C_i,H,W]) tensors along the channel axis.
template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>* const> parts) {
  if (parts.empty()) throw DimensionError("concat needs at least one input");
  const auto first = detail::as_batch(*parts[0], "concat input");
  Index channels = 0;
  for (const auto* t : parts) {
    const auto b = detail::as_batch(*t, "concat input");
    if (b.n != first.n || b.h != first.h || b.w != first.w || t->rank() != parts[0]->rank()) {
      throw DimensionError("concat: shape " + shape_string(t->shape()) + " incompatible with " +
                           shape_string(parts[0]->shape()));
    }
    channels += b.c;
  }
  const Index plane = first.h * first.w;
  Tensor<Scalar> out(detail::with_batch(parts[0]->rank() == 4, first.n, channels, first.h, first.w));
  for (Index n = 0; n < first.n; ++n) {
    Scalar* dst = out.data() + n * channels * plane;
    for (const auto* t : parts) {
      const Index c = t->size() / (first.n * plane);
      const Scalar* src = t->data() + n * c * plane;
      dst = std::copy(src, src + c * plane, dst);
    }
  }
  return out;
}

/// Splits a channel-concatenated gradient back into per-part gradients.
template <typename Scalar>
std::vector<Tensor<Scalar>> concat_channels_backward(std::span<const Shape> part_shapes,
                                                     const Tensor<Scalar>& grad_out) {
  const auto b = detail::as_batch(grad_out, "concat grad");
  const Index plane = b.h * b.w;
  std::vector<Tensor<Scalar>> grads;
  grads.reserve(part_shapes.size());
  for (const auto& s : part_shapes) grads.emplace_back(s);
  for (Index n = 0; n < b.n; ++n) {
    const Scalar* src = grad_out.data() + n * b.c * plane;
    for (auto& g : grads) {
      const Index c = g.size() / (b.n * plane);
      std::copy(src, src + c * plane, g.data() + n * c * plane);
      src += c * plane;
    }
  }
  return grads;
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor<Scalar> out = a;
  out.vector() += b.vector();
  return out;
}

}  // namespace lithocnn
