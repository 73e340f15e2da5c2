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

#include "lithocnn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "lithocnn/conv.hpp"
#include "lithocnn/image.hpp"

namespace lithocnn {
namespace {

void check_image(const TensorF& t, const char* what) {
  if (t.rank() != 3) throw DimensionError(std::string(what) + " expects [C,H,W], got " + shape_string(t.shape()));
}

// Mirror an index into [0, n): -1 -> 0, n -> n-1 (edge sample repeated).
Index mirror(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

TensorF clamped(TensorF t) {
  t.vector() = t.vector().cwiseMax(0.0f).cwiseMin(1.0f);
  return t;
}

constexpr std::array<std::pair<AugOp, const char*>, 7> kOpNames{{
    {AugOp::rotate90, "rotate90"},
    {AugOp::rotate, "rotate"},
    {AugOp::brightness, "brightness"},
    {AugOp::color_shift, "color_shift"},
    {AugOp::random_crop, "random_crop"},
    {AugOp::noise, "noise"},
    {AugOp::blur, "blur"},
}};

}  // namespace

TensorF rotate_right_angle(const TensorF& image, int degrees) {
  check_image(image, "rotate");
  if (degrees % 90 != 0) throw ParameterError("rotate_right_angle needs a multiple of 90 degrees");
  const int turns = ((degrees / 90) % 4 + 4) % 4;
  TensorF cur = image;
  for (int t = 0; t < turns; ++t) {
    const Index C = cur.dim(0), H = cur.dim(1), W = cur.dim(2);
    TensorF next({C, W, H});
    for (Index c = 0; c < C; ++c) {
      for (Index i = 0; i < W; ++i) {
        for (Index j = 0; j < H; ++j) next(c, i, j) = cur(c, j, W - 1 - i);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

TensorF rotate(const TensorF& image, double degrees) {
  check_image(image, "rotate");
  const double turns = degrees / 90.0;
  if (turns == std::round(turns)) return rotate_right_angle(image, static_cast<int>(std::lround(turns)) * 90);
  const Index C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (static_cast<double>(H) - 1) / 2, cx = (static_cast<double>(W) - 1) / 2;
  TensorF out(image.shape());
  for (Index y = 0; y < H; ++y) {
    for (Index x = 0; x < W; ++x) {
      // Inverse map of a counter-clockwise rotation (image y axis points down).
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double sx = cx + cs * dx - sn * dy;
      const double sy = cy + sn * dx + cs * dy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const Index x0 = mirror(static_cast<Index>(fx), W), x1 = mirror(static_cast<Index>(fx) + 1, W);
      const Index y0 = mirror(static_cast<Index>(fy), H), y1 = mirror(static_cast<Index>(fy) + 1, H);
      for (Index c = 0; c < C; ++c) {
        const double top = image(c, y0, x0) * (1 - ax) + image(c, y0, x1) * ax;
        const double bot = image(c, y1, x0) * (1 - ax) + image(c, y1, x1) * ax;
        out(c, y, x) = static_cast<float>(top * (1 - ay) + bot * ay);
      }
    }
  }
  return clamped(std::move(out));
}

TensorF adjust_brightness(const TensorF& image, double delta) {
  check_image(image, "adjust_brightness");
  TensorF out = image;
  out.vector().array() += static_cast<float>(delta);
  return clamped(std::move(out));
}

TensorF color_shift(const TensorF& image, std::span<const double> gains) {
  check_image(image, "color_shift");
  if (static_cast<Index>(gains.size()) != image.dim(0)) {
    throw DimensionError("color_shift needs one gain per channel (" + std::to_string(image.dim(0)) + "), got " +
                         std::to_string(gains.size()));
  }
  TensorF out = image;
  const Index plane = image.dim(1) * image.dim(2);
  for (Index c = 0; c < image.dim(0); ++c) {
    out.vector().segment(c * plane, plane) *= static_cast<float>(gains[static_cast<std::size_t>(c)]);
  }
  return clamped(std::move(out));
}

TensorF random_crop(const TensorF& image, double fraction, RngHandle rng, CropMode mode, float fill) {
  check_image(image, "random_crop");
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ParameterError("crop fraction must be in [0,1)");
  if (fraction == 0.0) return image;
  const Index C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const Index h = static_cast<Index>(std::ceil(fraction * static_cast<double>(H)));
  const Index w = static_cast<Index>(std::ceil(fraction * static_cast<double>(W)));
  if (mode == CropMode::blank) {
    const Index y0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(H - h + 1)));
    const Index x0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(W - w + 1)));
    TensorF out = image;
    for (Index c = 0; c < C; ++c) {
      for (Index y = y0; y < y0 + h; ++y) {
        for (Index x = x0; x < x0 + w; ++x) out(c, y, x) = fill;
      }
    }
    return out;
  }
  // Keep a (H-h) x (W-w) window at a uniform offset, then restore the size.
  const Index kh = H - h, kw = W - w;
  if (kh < 2 || kw < 2) throw ParameterError("crop fraction leaves too small a window");
  const Index oy = static_cast<Index>(rng.below(static_cast<std::uint64_t>(h + 1)));
  const Index ox = static_cast<Index>(rng.below(static_cast<std::uint64_t>(w + 1)));
  TensorF window({C, kh, kw});
  for (Index c = 0; c < C; ++c) {
    for (Index y = 0; y < kh; ++y) {
      for (Index x = 0; x < kw; ++x) window(c, y, x) = image(c, oy + y, ox + x);
    }
  }
  return resize_bilinear(window, H, W);
}

TensorF gaussian_noise(const TensorF& image, double sigma, RngHandle rng) {
  check_image(image, "gaussian_noise");
  if (sigma < 0) throw ParameterError("noise sigma must be non-negative");
  if (sigma == 0) return image;
  TensorF out = image;
  for (Index i = 0; i < out.size(); ++i) out[i] = static_cast<float>(out[i] + rng.normal() * sigma);
  return clamped(std::move(out));
}

TensorF blur(const TensorF& image, Index k) {
  check_image(image, "blur");
  if (k < 1 || k % 2 == 0) throw ParameterError("blur kernel size must be odd and positive, got " + std::to_string(k));
  if (k == 1) return image;
  const Index C = image.dim(0), H = image.dim(1), W = image.dim(2), r = k / 2;
  // Channels become the batch axis of a single-filter convolution over a mirrored frame.
  TensorF padded({C, 1, H + 2 * r, W + 2 * r});
  for (Index c = 0; c < C; ++c) {
    for (Index y = 0; y < H + 2 * r; ++y) {
      for (Index x = 0; x < W + 2 * r; ++x) padded(c, 0, y, x) = image(c, mirror(y - r, H), mirror(x - r, W));
    }
  }
  const TensorF kernel({1, 1, k, k}, 1.0f / static_cast<float>(k * k));
  const TensorF bias({1}, 0.0f);
  TensorF out = conv2d(padded, kernel, bias, ConvParams{k, 1, 0, 1, 1});
  return clamped(out.reshaped({C, H, W}));
}

std::string to_string(AugOp op) {
  for (auto& [o, n] : kOpNames) {
    if (o == op) return n;
  }
  return "?";
}

AugOp aug_op_from_string(const std::string& name) {
  for (auto& [o, n] : kOpNames) {
    if (name == n) return o;
  }
  throw ParameterError("unknown augmentation op '" + name + "'");
}

AugmentationPipeline AugmentationPipeline::defaults(std::uint64_t seed) {
  AugmentationPipeline p;
  p.seed = seed;
  p.steps = {
      {AugOp::rotate90, 0.5, 0, 0, CropMode::blank},
      {AugOp::rotate, 0.5, -15, 15, CropMode::blank},
      {AugOp::brightness, 0.5, -0.2, 0.2, CropMode::blank},
      {AugOp::color_shift, 0.5, 0.8, 1.2, CropMode::blank},
      {AugOp::random_crop, 0.25, 0.05, 0.25, CropMode::blank},
      {AugOp::noise, 0.5, 0.0, 0.05, CropMode::blank},
      {AugOp::blur, 0.25, 3, 5, CropMode::blank},
  };
  return p;
}

void AugmentationPipeline::validate() const {
  for (const auto& s : steps) {
    const std::string op = to_string(s.op);
    if (!(s.probability >= 0 && s.probability <= 1)) throw ParameterError(op + ": probability must be in [0,1]");
    if (s.lo > s.hi) throw ParameterError(op + ": range lower bound exceeds upper bound");
    switch (s.op) {
      case AugOp::random_crop:
        if (s.lo < 0 || s.hi >= 1) throw ParameterError("random_crop: fraction range must lie in [0,1)");
        break;
      case AugOp::noise:
        if (s.lo < 0) throw ParameterError("noise: sigma must be non-negative");
        break;
      case AugOp::color_shift:
        if (s.lo < 0) throw ParameterError("color_shift: gains must be non-negative");
        break;
      case AugOp::blur:
        if (s.lo < 1) throw ParameterError("blur: kernel size must be >= 1");
        break;
      default:
        break;
    }
  }
}

TensorF AugmentationPipeline::apply(const TensorF& image, RngHandle rng) const {
  TensorF cur = image;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const AugStep& s = steps[i];
    RngHandle r = rng.split(i);
    if (!r.bernoulli(s.probability)) continue;
    const double v = r.uniform(s.lo, s.hi);
    switch (s.op) {
      case AugOp::rotate90:
        cur = rotate_right_angle(cur, 90 * static_cast<int>(1 + r.below(3)));
        break;
      case AugOp::rotate:
        cur = rotate(cur, v);
        break;
      case AugOp::brightness:
        cur = adjust_brightness(cur, v);
        break;
      case AugOp::color_shift: {
        std::vector<double> gains(static_cast<std::size_t>(cur.dim(0)));
        for (auto& g : gains) g = r.uniform(s.lo, s.hi);
        cur = color_shift(cur, gains);
        break;
      }
      case AugOp::random_crop:
        cur = random_crop(cur, v, r.split(1), s.crop_mode);
        break;
      case AugOp::noise:
        cur = gaussian_noise(cur, v, r.split(1));
        break;
      case AugOp::blur: {
        // Odd sizes in [lo, hi], chosen uniformly.
        const Index lo = static_cast<Index>(std::ceil(s.lo)) | 1;
        const Index hi = static_cast<Index>(std::floor(s.hi));
        if (hi < lo) break;
        const Index choices = (hi - lo) / 2 + 1;
        cur = blur(cur, lo + 2 * static_cast<Index>(r.below(static_cast<std::uint64_t>(choices))));
        break;
      }
    }
  }
  return cur;
}

RngHandle AugmentationPipeline::variant_rng(const std::string& id, std::uint64_t j) const {
  return RngHandle(seed, hash_combine(fnv1a(id), j));
}

nlohmann::json to_json(const AugmentationPipeline& p) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : p.steps) {
    nlohmann::json j{{"op", to_string(s.op)}, {"probability", s.probability}};
    if (s.op != AugOp::rotate90) j["range"] = {s.lo, s.hi};
    if (s.op == AugOp::random_crop) j["mode"] = s.crop_mode == CropMode::blank ? "blank" : "resize";
    steps.push_back(j);
  }
  return {{"seed", p.seed}, {"steps", steps}};
}

AugmentationPipeline pipeline_from_json(const nlohmann::json& j) {
  AugmentationPipeline p;
  try {
    p.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("steps")) return AugmentationPipeline::defaults(p.seed);
    for (const auto& sj : j.at("steps")) {
      AugStep s;
      s.op = aug_op_from_string(sj.at("op").get<std::string>());
      s.probability = sj.value("probability", 0.5);
      if (sj.contains("range")) {
        s.lo = sj["range"].at(0).get<double>();
        s.hi = sj["range"].at(1).get<double>();
      }
      const std::string mode = sj.value("mode", std::string("blank"));
      if (mode != "blank" && mode != "resize") throw ParameterError("random_crop mode must be blank or resize");
      s.crop_mode = mode == "blank" ? CropMode::blank : CropMode::resize;
      p.steps.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("bad augmentation pipeline: ") + e.what());
  }
  p.validate();
  return p;
}

Index OversampleConfig::target_for(Lithotype label, Index current) const {
  if (auto it = targets.find(label); it != targets.end()) return it->second;
  return default_target > 0 ? default_target : current;
}

OversampleConfig oversample_config_from_json(const nlohmann::json& j) {
  OversampleConfig c;
  c.pipeline = pipeline_from_json(j);
  try {
    if (j.contains("targets")) {
      for (auto& [k, v] : j["targets"].items()) {
        if (k == "default") {
          c.default_target = v.get<Index>();
        } else {
          c.targets[lithotype_from_string(k)] = v.get<Index>();
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("bad oversampling targets: ") + e.what());
  } catch (const DataError& e) {
    throw ParameterError(std::string("bad oversampling targets: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const OversampleConfig& c) {
  nlohmann::json j = to_json(c.pipeline);
  nlohmann::json t = nlohmann::json::object();
  if (c.default_target > 0) t["default"] = c.default_target;
  for (auto& [k, v] : c.targets) t[std::string(to_string(k))] = v;
  j["targets"] = t;
  return j;
}

std::vector<ManifestRecord> oversample(const Manifest& corpus, const OversampleConfig& config,
                                       const std::filesystem::path& out_dir) {
  config.pipeline.validate();
  std::map<Lithotype, std::vector<const ManifestRecord*>> by_class;
  for (const auto& r : corpus.records) {
    if (!r.label) throw DataError("oversample: record '" + r.id + "' has no label");
    by_class[*r.label].push_back(&r);
  }
  for (auto& [label, target] : config.targets) {
    if (!by_class.count(label)) throw DataError("oversample: class " + std::string(to_string(label)) + " is empty");
  }
  std::filesystem::create_directories(out_dir);

  struct Job {
    const ManifestRecord* src;
    std::uint64_t variant;  // 0 = original copy
    ManifestRecord out;
  };
  std::vector<Job> jobs;
  for (auto& [label, members] : by_class) {
    const Index n = static_cast<Index>(members.size());
    const Index target = config.target_for(label, n);
    if (target < n) {
      throw DataError("oversample: target " + std::to_string(target) + " for " + std::string(to_string(label)) +
                      " is below its current count " + std::to_string(n));
    }
    for (const auto* m : members) {
      ManifestRecord r = *m;
      r.source_id = m->source_id.empty() ? m->id : m->source_id;
      r.path = m->id + std::filesystem::path(m->path).extension().string();
      jobs.push_back({m, 0, std::move(r)});
    }
    for (Index k = 0; k < target - n; ++k) {
      const auto* m = members[static_cast<std::size_t>(k % n)];
      const auto j = static_cast<std::uint64_t>(k / n + 1);
      ManifestRecord r = *m;
      r.id = m->id + "_aug" + std::to_string(j);
      r.source_id = m->source_id.empty() ? m->id : m->source_id;
      r.path = r.id + ".png";
      r.extra["augmented_from"] = m->id;
      r.extra["variant"] = j;
      jobs.push_back({m, j, std::move(r)});
    }
  }

  std::set<std::string> ids;
  for (const auto& job : jobs) {
    if (!ids.insert(job.out.id).second) throw DataError("oversample: duplicate record id '" + job.out.id + "'");
  }

  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      const auto& job = jobs[i];
      const auto src = corpus.resolve(*job.src);
      const auto dst = out_dir / job.out.path;
      if (job.variant == 0) {
        std::filesystem::copy_file(src, dst, std::filesystem::copy_options::overwrite_existing);
      } else {
        const TensorF img = normalize(read_image(src));
        write_png(dst, denormalize(config.pipeline.apply(img, config.pipeline.variant_rng(job.src->id, job.variant))));
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw DataError("oversample: " + error);

  std::vector<ManifestRecord> out;
  out.reserve(jobs.size());
  for (auto& job : jobs) out.push_back(std::move(job.out));
  return out;
}

std::vector<std::string> leakage(std::span<const ManifestRecord> train, std::span<const ManifestRecord> held_out) {
  std::set<std::string> held;
  for (const auto& r : held_out) {
    held.insert(r.id);
    held.insert(r.source_id.empty() ? r.id : r.source_id);
  }
  std::vector<std::string> leaks;
  for (const auto& r : train) {
    const std::string& src = r.source_id.empty() ? r.id : r.source_id;
    if (held.count(r.id) || held.count(src)) leaks.push_back(r.id);
  }
  return leaks;
}

}  // namespace lithocnn
