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

#include "lithocnn/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/QR>

#include "lithocnn/image.hpp"

namespace lithocnn {

TensorF FeatureMap::display(Index f) const {
  if (f < 0 || f >= filters()) throw DimensionError("filter index out of range for layer '" + layer + "'");
  const Index h = activation.rank() == 3 ? activation.dim(1) : 1;
  const Index w = activation.rank() == 3 ? activation.dim(2) : activation.size();
  TensorF out({1, h, w});
  const float lo = min[static_cast<std::size_t>(f)], hi = max[static_cast<std::size_t>(f)];
  const float* src = activation.data() + f * h * w;
  for (Index i = 0; i < h * w; ++i) out[i] = hi > lo ? (src[i] - lo) / (hi - lo) : 0.0f;
  return out;
}

FeatureMapSet extract_feature_maps(const Network<float>& net, const TensorF& tile, std::span<const std::string> layers) {
  FeatureMapSet set;
  const auto captured = net.capture(tile, layers, &set.output);
  for (const auto& name : layers) {
    const TensorF& batch = captured.at(name);
    FeatureMap m;
    m.layer = name;
    m.activation = batch.reshaped(Shape(batch.shape().begin() + 1, batch.shape().end()));
    const Index f = m.filters();
    const Index plane = m.activation.size() / f;
    for (Index k = 0; k < f; ++k) {
      const auto seg = m.activation.vector().segment(k * plane, plane);
      m.min.push_back(seg.minCoeff());
      m.max.push_back(seg.maxCoeff());
    }
    set.layers.push_back(std::move(m));
  }
  return set;
}

void export_feature_maps(const FeatureMapSet& maps, const std::filesystem::path& dir, Index filters) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& m : maps.layers) {
    std::string safe = m.layer;
    std::replace(safe.begin(), safe.end(), '/', '_');
    nlohmann::json files = nlohmann::json::array();
    for (Index f = 0; f < std::min(filters, m.filters()); ++f) {
      const std::string file = safe + "_f" + std::to_string(f) + ".png";
      write_png(dir / file, denormalize(m.display(f)));
      files.push_back(file);
    }
    doc.push_back({{"layer", m.layer},
                   {"shape", m.activation.shape()},
                   {"min", m.min},
                   {"max", m.max},
                   {"images", files}});
  }
  std::ofstream(dir / "feature_maps.json") << doc.dump(2) << '\n';
}

PredictFn network_predictor(const Network<float>& net) {
  return [&net](const TensorF& batch) { return net.predict(batch); };
}

Surrogate fit_surrogate(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& sw) {
  const Index n = z.rows(), r = z.cols();
  if (y.size() != n || sw.size() != n) throw DimensionError("fit_surrogate: row counts differ");
  if (n < r + 1) throw ParameterError("fit_surrogate: need at least regions + 1 samples");
  Eigen::MatrixXd a(n, r + 1);
  a.col(0).setOnes();
  a.rightCols(r) = z;
  const Eigen::VectorXd s = sw.cwiseSqrt();
  const Eigen::MatrixXd aw = s.asDiagonal() * a;
  const Eigen::VectorXd yw = s.cwiseProduct(y);
  const Eigen::VectorXd beta = aw.colPivHouseholderQr().solve(yw);
  Surrogate out;
  out.intercept = beta[0];
  out.weights = beta.tail(r);
  const Eigen::VectorXd res = a * beta - y;
  out.residual = std::sqrt(res.cwiseAbs2().dot(sw) / sw.sum());
  return out;
}

void apply_region_mask(TensorF& tile, Index grid, std::span<const std::uint8_t> keep, std::span<const float> fill) {
  const Index C = tile.dim(0), H = tile.dim(1), W = tile.dim(2);
  if (static_cast<Index>(keep.size()) != grid * grid) throw DimensionError("mask size does not match the grid");
  for (Index gr = 0; gr < grid; ++gr) {
    for (Index gc = 0; gc < grid; ++gc) {
      if (keep[static_cast<std::size_t>(gr * grid + gc)]) continue;
      for (Index c = 0; c < C; ++c) {
        for (Index y = gr * H / grid; y < (gr + 1) * H / grid; ++y) {
          for (Index x = gc * W / grid; x < (gc + 1) * W / grid; ++x) tile(c, y, x) = fill[static_cast<std::size_t>(c)];
        }
      }
    }
  }
}

Explanation explain(const PredictFn& predict, const TensorF& tile, Index target_class, const LimeConfig& cfg,
                    RngHandle rng) {
  if (tile.rank() != 3) throw DimensionError("explain expects a [C,H,W] tile");
  const Index g = cfg.grid, R = g * g;
  if (g < 1 || g > std::min(tile.dim(1), tile.dim(2))) throw ParameterError("LIME grid does not fit the tile");
  if (cfg.samples < R + 1) throw ParameterError("LIME needs at least grid*grid + 1 samples");
  if (!(cfg.sigma > 0)) throw ParameterError("LIME kernel width must be positive");

  const Index C = tile.dim(0), plane = tile.dim(1) * tile.dim(2);
  std::vector<float> fill(static_cast<std::size_t>(C));
  for (Index c = 0; c < C; ++c) fill[static_cast<std::size_t>(c)] = tile.vector().segment(c * plane, plane).mean();

  Eigen::MatrixXd z(cfg.samples, R);
  for (Index s = 0; s < cfg.samples; ++s) {
    for (Index i = 0; i < R; ++i) z(s, i) = s == 0 ? 1.0 : (rng.bernoulli(0.5) ? 1.0 : 0.0);
  }

  Eigen::VectorXd y(cfg.samples);
  Index cls = target_class;
  for (Index start = 0; start < cfg.samples; start += cfg.batch) {
    const Index b = std::min(cfg.batch, cfg.samples - start);
    TensorF batch({b, C, tile.dim(1), tile.dim(2)});
    for (Index k = 0; k < b; ++k) {
      TensorF masked = tile;
      std::vector<std::uint8_t> keep(static_cast<std::size_t>(R));
      for (Index i = 0; i < R; ++i) keep[static_cast<std::size_t>(i)] = z(start + k, i) > 0.5;
      apply_region_mask(masked, g, keep, fill);
      batch.vector().segment(k * masked.size(), masked.size()) = masked.vector();
    }
    const TensorF scores = predict(batch);
    if (scores.rank() != 2 || scores.dim(0) != b) throw DimensionError("predictor must return [B,classes]");
    if (cls < 0) {
      Eigen::Index best = 0;
      scores.matrix(b, scores.dim(1)).row(0).maxCoeff(&best);
      cls = best;
    }
    if (cls >= scores.dim(1)) throw ParameterError("class to explain is out of range");
    for (Index k = 0; k < b; ++k) y[start + k] = scores(k, cls);
  }

  Eigen::VectorXd sw(cfg.samples);
  for (Index s = 0; s < cfg.samples; ++s) {
    const double d = 1.0 - z.row(s).sum() / static_cast<double>(R);
    sw[s] = std::exp(-d * d / (cfg.sigma * cfg.sigma));
  }
  const Surrogate fit = fit_surrogate(z, y, sw);

  Explanation e;
  e.grid_rows = g;
  e.grid_cols = g;
  e.explained_class = cls;
  e.intercept = fit.intercept;
  e.residual = fit.residual;
  e.uninformative = y.maxCoeff() - y.minCoeff() < 1e-12;
  for (Index i = 0; i < R; ++i) e.regions.push_back({i / g, i % g, fit.weights[i]});
  std::vector<Index> order(static_cast<std::size_t>(R));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return fit.weights[a] > fit.weights[b]; });
  e.mask.assign(static_cast<std::size_t>(R), false);
  for (Index k = 0; k < std::min(cfg.top_k, R); ++k) {
    const Index i = order[static_cast<std::size_t>(k)];
    if (fit.weights[i] > 0 && !e.uninformative) e.mask[static_cast<std::size_t>(i)] = true;
  }
  return e;
}

Explanation explain(const Network<float>& net, const TensorF& tile, Index target_class, const LimeConfig& cfg,
                    RngHandle rng) {
  return explain(network_predictor(net), tile, target_class, cfg, rng);
}

nlohmann::json to_json(const Explanation& e) {
  nlohmann::json regions = nlohmann::json::array();
  for (std::size_t i = 0; i < e.regions.size(); ++i) {
    const auto& r = e.regions[i];
    regions.push_back({{"row", r.row}, {"col", r.col}, {"weight", r.weight}, {"selected", bool(e.mask[i])}});
  }
  return {{"grid", {e.grid_rows, e.grid_cols}},
          {"class", e.explained_class},
          {"intercept", e.intercept},
          {"residual", e.residual},
          {"uninformative", e.uninformative},
          {"regions", regions}};
}

void export_explanation(const Explanation& e, const TensorF& tile, const std::filesystem::path& png,
                        const std::filesystem::path& json) {
  TensorF overlay = tile;
  const Index C = tile.dim(0), H = tile.dim(1), W = tile.dim(2), g = e.grid_rows;
  for (Index gr = 0; gr < g; ++gr) {
    for (Index gc = 0; gc < g; ++gc) {
      if (e.mask[static_cast<std::size_t>(gr * g + gc)]) continue;
      for (Index c = 0; c < C; ++c) {
        for (Index y = gr * H / g; y < (gr + 1) * H / g; ++y) {
          for (Index x = gc * W / g; x < (gc + 1) * W / g; ++x) overlay(c, y, x) *= 0.3f;
        }
      }
    }
  }
  write_png(png, denormalize(overlay));
  std::ofstream(json) << to_json(e).dump(2) << '\n';
}

}  // namespace lithocnn
