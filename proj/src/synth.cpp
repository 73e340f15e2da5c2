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

#include "lithocnn/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "lithocnn/rng.hpp"

namespace lithocnn {
namespace {

using Rgb = std::array<double, 3>;

// Smooth value noise in [-1, 1]: random lattice values every `spacing` px, bilinear in between.
class ValueNoise {
 public:
  ValueNoise(RngHandle& rng, Index size, double spacing)
      : spacing_(spacing), n_(static_cast<Index>(std::ceil(static_cast<double>(size) / spacing)) + 2) {
    lattice_.resize(static_cast<std::size_t>(n_ * n_));
    for (auto& v : lattice_) v = rng.uniform(-1.0, 1.0);
  }
  double operator()(double y, double x) const {
    const double fy = y / spacing_, fx = x / spacing_;
    const Index iy = static_cast<Index>(fy), ix = static_cast<Index>(fx);
    const double ty = fy - static_cast<double>(iy), tx = fx - static_cast<double>(ix);
    const auto at = [&](Index a, Index b) { return lattice_[static_cast<std::size_t>(a * n_ + b)]; };
    const double top = at(iy, ix) * (1 - tx) + at(iy, ix + 1) * tx;
    const double bot = at(iy + 1, ix) * (1 - tx) + at(iy + 1, ix + 1) * tx;
    return top * (1 - ty) + bot * ty;
  }

 private:
  double spacing_;
  Index n_;
  std::vector<double> lattice_;
};

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Rgb jitter(const Rgb& base, double amount, RngHandle& rng) {
  const double common = rng.uniform(-amount, amount);
  Rgb out;
  for (int c = 0; c < 3; ++c) out[c] = base[c] + common + rng.uniform(-amount / 4, amount / 4);
  return out;
}

// Laminated sandstone and siltstone share a tan base; faint laminae are what separates them.
constexpr Rgb kTan{165, 145, 110};
constexpr Rgb kPaleTan{198, 176, 132};

template <typename F>
Image8 paint(Index size, F&& f) {
  Image8 img(size, size, 3);
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      const Rgb v = f(y, x);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = to_byte(v[c]);
    }
  }
  return img;
}

Image8 argillite(RngHandle& rng, Index size) {
  const double g = rng.uniform(50, 75);
  const Rgb base = jitter({g, g, g + 4}, 4, rng);
  const ValueNoise smooth(rng, size, 40);
  return paint(size, [&](Index y, Index x) {
    const double v = 6 * smooth(y, x) + rng.normal(0, 3);
    return Rgb{base[0] + v, base[1] + v, base[2] + v};
  });
}

Image8 granite(RngHandle& rng, Index size) {
  constexpr double cell = 14;
  const Index n = static_cast<Index>(std::ceil(static_cast<double>(size) / cell));
  struct Seed {
    double y, x;
    Rgb color;
  };
  constexpr std::array<Rgb, 3> minerals{{{200, 150, 135}, {215, 210, 205}, {45, 45, 50}}};
  std::vector<Seed> seeds(static_cast<std::size_t>(n * n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double u = rng.uniform();
      const Rgb& m = minerals[u < 0.45 ? 0 : (u < 0.8 ? 1 : 2)];
      seeds[static_cast<std::size_t>(i * n + j)] = {(static_cast<double>(i) + rng.uniform()) * cell,
                                                     (static_cast<double>(j) + rng.uniform()) * cell,
                                                     jitter(m, 12, rng)};
    }
  }
  return paint(size, [&](Index y, Index x) {
    const Index ci = static_cast<Index>(static_cast<double>(y) / cell), cj = static_cast<Index>(static_cast<double>(x) / cell);
    double best = 1e300;
    const Seed* nearest = nullptr;
    for (Index a = std::max<Index>(0, ci - 1); a <= std::min(n - 1, ci + 1); ++a) {
      for (Index b = std::max<Index>(0, cj - 1); b <= std::min(n - 1, cj + 1); ++b) {
        const Seed& s = seeds[static_cast<std::size_t>(a * n + b)];
        const double d = (s.y - static_cast<double>(y)) * (s.y - static_cast<double>(y)) +
                         (s.x - static_cast<double>(x)) * (s.x - static_cast<double>(x));
        if (d < best) {
          best = d;
          nearest = &s;
        }
      }
    }
    const double e = rng.normal(0, 5);
    return Rgb{nearest->color[0] + e, nearest->color[1] + e, nearest->color[2] + e};
  });
}

Image8 limestone(RngHandle& rng, Index size) {
  const Rgb base = jitter({205, 195, 170}, 10, rng);
  const ValueNoise blotch(rng, size, 30), fine(rng, size, 10);
  return paint(size, [&](Index y, Index x) {
    const double v = 25 * blotch(y, x) + 8 * fine(y, x) + rng.normal(0, 3);
    return Rgb{base[0] + v, base[1] + v, base[2] + 0.9 * v};
  });
}

Image8 laminated(RngHandle& rng, Index size) {
  const Rgb base = jitter(kTan, 12, rng);
  const double period = rng.uniform(7, 16);
  const double amplitude = rng.uniform(3, 35);
  const double tilt = rng.uniform(-4, 4) * std::numbers::pi / 180;
  const double phase = rng.uniform(0, 2 * std::numbers::pi);
  const ValueNoise wobble(rng, size, 60);
  return paint(size, [&](Index y, Index x) {
    const double yy = static_cast<double>(y) * std::cos(tilt) + static_cast<double>(x) * std::sin(tilt);
    const double lam = amplitude * std::sin(2 * std::numbers::pi * yy / period + phase + 1.5 * wobble(y, x));
    const double v = lam + rng.normal(0, 14);
    return Rgb{base[0] + v, base[1] + v, base[2] + v};
  });
}

Image8 massive(RngHandle& rng, Index size) {
  const Rgb base = jitter(kPaleTan, 10, rng);
  const ValueNoise grain(rng, size, 5);
  return paint(size, [&](Index y, Index x) {
    const double v = 28 * grain(y, x) + rng.normal(0, 8);
    return Rgb{base[0] + v, base[1] + v, base[2] + v};
  });
}

Image8 siltstone(RngHandle& rng, Index size) {
  const Rgb base = jitter(kTan, 12, rng);
  const ValueNoise smooth(rng, size, 50);
  return paint(size, [&](Index y, Index x) {
    const double v = 5 * smooth(y, x) + rng.normal(0, 14);
    return Rgb{base[0] + v, base[1] + v, base[2] + v};
  });
}

}  // namespace

Image8 synth_tile(Lithotype label, std::uint64_t seed, Index index, Index size) {
  if (size < 8) throw ParameterError("synthetic tile size must be >= 8");
  RngHandle rng(seed, hash_combine(kSynthVersion, hash_combine(static_cast<std::uint64_t>(label),
                                                               static_cast<std::uint64_t>(index))));
  switch (label) {
    case Lithotype::argillite:
      return argillite(rng, size);
    case Lithotype::granite:
      return granite(rng, size);
    case Lithotype::limestone:
      return limestone(rng, size);
    case Lithotype::sandstone_laminated:
      return laminated(rng, size);
    case Lithotype::sandstone_massive:
      return massive(rng, size);
    case Lithotype::siltstone:
      return siltstone(rng, size);
  }
  throw ParameterError("unknown lithotype");
}

std::vector<ManifestRecord> synth_corpus(const std::filesystem::path& out_dir, const std::map<Lithotype, Index>& per_class,
                                         std::uint64_t seed, Index first_index, Index size) {
  std::filesystem::create_directories(out_dir);
  std::vector<ManifestRecord> records;
  for (const auto& [label, count] : per_class) {
    for (Index i = first_index; i < first_index + count; ++i) {
      ManifestRecord r;
      r.id = "syn" + std::to_string(seed) + "_" + std::to_string(static_cast<int>(label)) + "_" + std::to_string(i);
      r.source_id = r.id;
      r.path = r.id + ".png";
      r.well_id = "SYN-" + std::string(to_string(label));
      r.depth_top_m = tile_depth(0.0, i);
      r.depth_bottom_m = tile_depth(0.0, i + 1);
      r.label = label;
      r.extra["generator_version"] = kSynthVersion;
      records.push_back(std::move(r));
    }
  }
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < records.size(); ++k) {
    try {
      const auto& r = records[k];
      const Index i = std::stol(r.id.substr(r.id.rfind('_') + 1));
      write_png(out_dir / r.path, synth_tile(*r.label, seed, i, size));
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw DataError("synth_corpus: " + error);
  return records;
}

std::vector<ManifestRecord> synth_well(const std::filesystem::path& out_dir, const std::string& well_id, Index tiles,
                                       double top_m, std::uint64_t seed, Index size) {
  std::filesystem::create_directories(out_dir);
  RngHandle beds(seed, fnv1a(well_id));
  std::vector<ManifestRecord> records;
  Index i = 0;
  while (i < tiles) {
    const auto label = static_cast<Lithotype>(beds.below(kLithotypeCount));
    const Index len = 5 + static_cast<Index>(beds.below(26));
    for (Index k = 0; k < len && i < tiles; ++k, ++i) {
      ManifestRecord r;
      r.id = well_id + "_" + std::to_string(i);
      r.source_id = r.id;
      r.path = r.id + ".png";
      r.well_id = well_id;
      r.depth_top_m = tile_depth(top_m, i);
      r.depth_bottom_m = tile_depth(top_m, i + 1);
      r.label = label;
      r.extra["generator_version"] = kSynthVersion;
      records.push_back(std::move(r));
    }
  }
  std::string error;
  const std::uint64_t well_seed = hash_combine(seed, fnv1a(well_id));
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < records.size(); ++k) {
    try {
      write_png(out_dir / records[k].path, synth_tile(*records[k].label, well_seed, static_cast<Index>(k), size));
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw DataError("synth_well: " + error);
  return records;
}

ManifestRecord synth_core_image(const std::filesystem::path& path, const std::string& well_id, Lithotype label,
                                Index tiles, double dpi, double top_m, std::uint64_t seed, Index extra_rows) {
  const Index t = tile_size_px(dpi);
  Image8 column(tiles * t + extra_rows, t, 3);
  const std::uint64_t image_seed = hash_combine(seed, fnv1a(well_id));
  for (Index i = 0; i * t < column.height; ++i) {
    const Image8 tile = synth_tile(label, image_seed, i, t);
    for (Index y = 0; y < t && i * t + y < column.height; ++y) {
      std::copy_n(&tile.data[static_cast<std::size_t>(y * t * 3)], t * 3,
                  &column.data[static_cast<std::size_t>((i * t + y) * t * 3)]);
    }
  }
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  write_png(path, column);
  ManifestRecord r;
  r.path = path.filename().string();
  r.well_id = well_id;
  r.depth_top_m = top_m;
  r.depth_bottom_m = top_m + static_cast<double>(column.height) / static_cast<double>(t) / 10.0;
  r.dpi = dpi;
  r.label = label;
  r.id = well_id + "_box";
  r.source_id = r.id;
  return r;
}

}  // namespace lithocnn
