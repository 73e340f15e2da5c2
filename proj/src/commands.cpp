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

#include "lithocnn/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "lithocnn/architectures.hpp"
#include "lithocnn/augment.hpp"

namespace lithocnn {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("failed writing " + path.string());
}

std::string read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_bytes(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("bad JSON in " + path.string() + ": " + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Paths of `records` (relative to from_dir) rewritten relative to to_dir.
std::vector<ManifestRecord> rebase(std::vector<ManifestRecord> records, const fs::path& from_dir,
                                   const fs::path& to_dir) {
  const fs::path to = fs::weakly_canonical(fs::absolute(to_dir));
  for (auto& r : records) {
    const fs::path p = fs::path(r.path).is_absolute() ? fs::path(r.path) : from_dir / r.path;
    r.path = fs::weakly_canonical(fs::absolute(p)).lexically_relative(to).generic_string();
  }
  return records;
}

void emit(const WarningSink& warn, const std::string& msg) {
  if (warn) warn(msg);
}

}  // namespace

int exit_code_for_current_exception() noexcept {
  try {
    throw;
  } catch (const NumericError&) {
    return kExitNumeric;
  } catch (const DataError&) {
    return kExitData;
  } catch (const ParameterError&) {
    return kExitUsage;
  } catch (const DimensionError&) {
    return kExitData;
  } catch (const fs::filesystem_error&) {
    return kExitData;
  } catch (...) {
    return 1;
  }
}

double DepthLog::span_m() const {
  return records.empty() ? 0.0 : records.back().depth_bottom_m - records.front().depth_top_m;
}

std::string depth_log_csv(const std::vector<DepthLog>& logs) {
  std::string out = "well_id,depth_top_m,depth_bottom_m,label,confidence,runner_up,runner_up_confidence\n";
  for (const auto& log : logs) {
    for (const auto& r : log.records) {
      out += log.well_id + "," + fmt(r.depth_top_m) + "," + fmt(r.depth_bottom_m) + "," + r.label + "," +
             fmt(r.confidence) + "," + r.runner_up + "," + fmt(r.runner_up_confidence) + "\n";
    }
  }
  return out;
}

nlohmann::json to_json(const std::vector<DepthLog>& logs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& log : logs) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : log.records) {
      recs.push_back({{"depth_top_m", r.depth_top_m},
                      {"depth_bottom_m", r.depth_bottom_m},
                      {"label", r.label},
                      {"confidence", r.confidence},
                      {"runner_up", r.runner_up},
                      {"runner_up_confidence", r.runner_up_confidence},
                      {"tile_id", r.tile_id}});
    }
    out.push_back({{"well_id", log.well_id}, {"span_m", log.span_m()}, {"records", std::move(recs)}});
  }
  return out;
}

TensorF load_tile_for(const Checkpoint& ckpt, const fs::path& path) {
  TensorF t = load_tile(path, checkpoint_color(ckpt));
  if (t.dim(1) != kInputExtent || t.dim(2) != kInputExtent) t = resize_bilinear(t, kInputExtent, kInputExtent);
  return t;
}

PredictResult predict_depth_log(const Checkpoint& ckpt, const Manifest& manifest, Index batch_size,
                                const WarningSink& warn) {
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  PredictResult res;
  if (manifest.records.empty()) {
    emit(warn, "manifest has no tiles; the depth log is empty");
    return res;
  }
  const auto start = std::chrono::steady_clock::now();
  const auto net = network_from_checkpoint(ckpt);
  const auto classes = checkpoint_classes(ckpt);
  const auto& recs = manifest.records;

  // Group by well in first-appearance order, then order by depth.
  std::vector<std::string> wells;
  std::map<std::string, std::vector<std::size_t>> by_well;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!(recs[i].depth_bottom_m > recs[i].depth_top_m)) {
      throw DataError("tile '" + recs[i].id + "' has an empty depth interval");
    }
    auto& v = by_well[recs[i].well_id];
    if (v.empty()) wells.push_back(recs[i].well_id);
    v.push_back(i);
  }
  std::vector<std::size_t> order;
  for (const auto& w : wells) {
    auto& v = by_well[w];
    const auto by_depth = [&](std::size_t a, std::size_t b) { return recs[a].depth_top_m < recs[b].depth_top_m; };
    if (!std::is_sorted(v.begin(), v.end(), by_depth)) {
      emit(warn, "tiles of well '" + w + "' are not in depth order; sorted by depth_top_m");
      std::stable_sort(v.begin(), v.end(), by_depth);
    }
    order.insert(order.end(), v.begin(), v.end());
  }

  struct Pred {
    Index best = 0, second = 0;
    float p_best = 0, p_second = 0;
  };
  std::vector<Pred> preds(order.size());
  const auto nb = static_cast<std::ptrdiff_t>((order.size() + static_cast<std::size_t>(batch_size) - 1) /
                                              static_cast<std::size_t>(batch_size));
  std::string error;
  // Weights are shared read-only; each batch writes its own slots.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    try {
      const std::size_t lo = static_cast<std::size_t>(b) * static_cast<std::size_t>(batch_size);
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(batch_size));
      std::vector<TensorF> tiles;
      for (std::size_t k = lo; k < hi; ++k) tiles.push_back(load_tile_for(ckpt, manifest.resolve(recs[order[k]])));
      Shape shape{static_cast<Index>(tiles.size())};
      shape.insert(shape.end(), tiles[0].shape().begin(), tiles[0].shape().end());
      TensorF batch(shape);
      const Index n = tiles[0].size();
      for (std::size_t k = 0; k < tiles.size(); ++k) batch.vector().segment(static_cast<Index>(k) * n, n) = tiles[k].vector();
      const TensorF probs = net.predict(batch);
      const Index K = probs.dim(1);
      for (std::size_t k = 0; k < tiles.size(); ++k) {
        const Index row = static_cast<Index>(k);
        Pred p;
        p.best = 0;
        for (Index j = 1; j < K; ++j) {
          if (probs(row, j) > probs(row, p.best)) p.best = j;
        }
        p.second = p.best == 0 ? 1 : 0;
        for (Index j = 0; j < K; ++j) {
          if (j != p.best && probs(row, j) > probs(row, p.second)) p.second = j;
        }
        p.p_best = probs(row, p.best);
        p.p_second = probs(row, p.second);
        preds[lo + k] = p;
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw DataError("predict: " + error);

  std::size_t k = 0;
  for (const auto& w : wells) {
    DepthLog log;
    log.well_id = w;
    for (std::size_t j = 0; j < by_well[w].size(); ++j, ++k) {
      const auto& r = recs[order[k]];
      if (!log.records.empty()) {
        const double prev = log.records.back().depth_bottom_m;
        if (r.depth_top_m < prev - 1e-9) {
          emit(warn, "well '" + w + "': tile '" + r.id + "' overlaps the previous tile");
        } else if (r.depth_top_m > prev + 1e-9) {
          emit(warn, "well '" + w + "': depth gap from " + fmt(prev) + " to " + fmt(r.depth_top_m) + " m");
        }
      }
      DepthRecord d;
      d.depth_top_m = r.depth_top_m;
      d.depth_bottom_m = r.depth_bottom_m;
      d.label = classes.at(static_cast<std::size_t>(preds[k].best));
      d.confidence = preds[k].p_best;
      d.runner_up = classes.at(static_cast<std::size_t>(preds[k].second));
      d.runner_up_confidence = preds[k].p_second;
      d.tile_id = r.id;
      log.records.push_back(std::move(d));
    }
    res.logs.push_back(std::move(log));
  }
  res.throughput.tiles = order.size();
  res.throughput.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

PrepareStats cmd_prepare(const fs::path& manifest_path, const fs::path& out_dir, const PrepareOptions& options,
                         const WarningSink& warn) {
  const Manifest manifest = read_manifest(manifest_path);
  if (manifest.records.empty()) throw DataError("prepare: manifest " + manifest_path.string() + " is empty");
  if (options.tile_px < 2) throw ParameterError("tile size must be >= 2 px");
  fs::create_directories(out_dir);

  // Previous output, keyed by source image hash.
  std::map<std::string, std::vector<ManifestRecord>> previous;
  const fs::path out_manifest = out_dir / "manifest.jsonl";
  if (fs::exists(out_manifest)) {
    try {
      for (auto& r : read_manifest(out_manifest).records) {
        if (r.extra.contains("image_hash")) previous[r.extra["image_hash"].get<std::string>()].push_back(r);
      }
    } catch (const DataError&) {
      previous.clear();
    }
  }

  PrepareStats stats;
  std::vector<ManifestRecord> out;
  for (const auto& rec : manifest.records) {
    const fs::path src = manifest.resolve(rec);
    const std::string bytes = read_bytes(src);
    nlohmann::json key{{"bytes", hex64(fnv1a(bytes))}, {"record", to_json(rec)}, {"tile_cm", options.tile_cm},
                       {"tile_px", options.tile_px}};
    const std::string hash = hex64(fnv1a(key.dump()));
    ++stats.images;

    auto it = previous.find(hash);
    const bool current = it != previous.end() && std::all_of(it->second.begin(), it->second.end(), [&](const auto& r) {
                           return fs::exists(out_dir / r.path) &&
                                  r.extra.value("content_hash", std::string()) == hex64(fnv1a(read_bytes(out_dir / r.path)));
                         });
    if (current) {
      ++stats.reused;
      stats.tiles += it->second.size();
      out.insert(out.end(), it->second.begin(), it->second.end());
      continue;
    }

    CoreBoxImage box;
    box.pixels = read_image(src);
    box.dpi = rec.dpi;
    box.well_id = rec.well_id;
    box.depth_top_m = rec.depth_top_m;
    box.depth_bottom_m = rec.depth_bottom_m;
    std::vector<std::string> warnings;
    const auto tiles = crop_samples(box, options.tile_cm, &warnings);
    for (const auto& w : warnings) emit(warn, w);
    const std::string image_id = rec.id.empty() ? fs::path(rec.path).stem().string() : rec.id;

    std::vector<ManifestRecord> made(tiles.size());
    std::string error;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < tiles.size(); ++i) {
      try {
        const auto& t = tiles[i];
        TensorF x = normalize(t.pixels);
        if (x.dim(1) != options.tile_px || x.dim(2) != options.tile_px) {
          x = resize_bilinear(x, options.tile_px, options.tile_px);
        }
        const auto png = encode_png(denormalize(x));
        ManifestRecord r;
        r.id = image_id + "_t" + std::to_string(t.index);
        r.source_id = r.id;
        r.path = r.id + ".png";
        r.well_id = t.well_id;
        r.depth_top_m = t.depth_top_m;
        r.depth_bottom_m = t.depth_bottom_m;
        r.color_mode = rec.color_mode;
        r.label = rec.label;
        r.extra = rec.extra;
        r.extra["image_id"] = image_id;
        r.extra["image_hash"] = hash;
        r.extra["content_hash"] = hex64(fnv1a(std::string(png.begin(), png.end())));
        std::ofstream f(out_dir / r.path, std::ios::binary | std::ios::trunc);
        f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
        if (!f) throw DataError("failed writing " + (out_dir / r.path).string());
        made[i] = std::move(r);
      } catch (const std::exception& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw DataError("prepare: " + error);
    stats.tiles += made.size();
    out.insert(out.end(), std::make_move_iterator(made.begin()), std::make_move_iterator(made.end()));
  }
  write_manifest(out_manifest, out);
  return stats;
}

DatasetSplit cmd_split(const fs::path& manifest_path, const fs::path& out_dir, std::uint64_t seed,
                       const SplitRule& rule) {
  const Manifest m = read_manifest(manifest_path);
  if (m.records.empty()) throw DataError("split: manifest " + manifest_path.string() + " is empty");
  DatasetSplit s = split_dataset(m.records, seed, rule);
  fs::create_directories(out_dir);
  write_manifest(out_dir / "train.jsonl", rebase(s.train, m.base_dir, out_dir));
  write_manifest(out_dir / "validation.jsonl", rebase(s.validation, m.base_dir, out_dir));
  write_manifest(out_dir / "test.jsonl", rebase(s.test, m.base_dir, out_dir));
  return s;
}

std::vector<ManifestRecord> cmd_augment(const fs::path& manifest_path, const fs::path& config_path,
                                        const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  if (config_path.empty()) throw ParameterError("augment: a pipeline config (--config) is required");
  if (!fs::exists(config_path)) throw ParameterError("augment: config " + config_path.string() + " does not exist");
  OversampleConfig cfg;
  try {
    cfg = oversample_config_from_json(read_json(config_path));
  } catch (const DataError& e) {
    throw ParameterError(std::string("augment: ") + e.what());
  }
  if (seed) cfg.pipeline.seed = *seed;
  const Manifest corpus = read_manifest(manifest_path);
  if (corpus.records.empty()) throw DataError("augment: manifest " + manifest_path.string() + " is empty");
  auto records = oversample(corpus, cfg, out_dir);
  for (auto& r : records) r.extra["augment_seed"] = cfg.pipeline.seed;
  write_manifest(out_dir / "manifest.jsonl", records);
  write_text(out_dir / "augment_config.json", to_json(cfg).dump(2) + "\n");
  return records;
}

TrainResult cmd_train(const TrainConfig& config, const TrainPaths& paths, const EpochCallback& on_epoch) {
  if (paths.train_manifest.empty() || paths.val_manifest.empty()) {
    throw ParameterError("train: --train and --val manifests are required");
  }
  if (paths.out_dir.empty()) throw ParameterError("train: --out is required");
  const Manifest tm = read_manifest(paths.train_manifest);
  const Manifest vm = read_manifest(paths.val_manifest);
  const auto leaked = leakage(tm.records, vm.records);
  if (!leaked.empty()) {
    throw DataError("train: " + std::to_string(leaked.size()) + " training tiles derive from validation tiles (first: '" +
                    leaked.front() + "')");
  }
  const Dataset train_set = load_dataset(tm, config.color);
  const Dataset val_set = load_dataset(vm, config.color);
  const nlohmann::json provenance{{"train_manifest_digest", records_digest(tm.records)},
                                  {"validation_manifest_digest", records_digest(vm.records)},
                                  {"train_records", tm.records.size()},
                                  {"validation_records", vm.records.size()}};
  return train(config, train_set, val_set, paths.out_dir, provenance, on_epoch);
}

EvalResult cmd_eval(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Manifest m = read_manifest(manifest);
  for (const auto& r : m.records) {
    if (!r.label) throw DataError("eval: record '" + r.id + "' has no label");
  }
  EvalResult res = evaluate(ckpt, m);
  if (!out_dir.empty()) {
    nlohmann::json j = to_json(res.report);
    j["mean_loss"] = res.mean_loss;
    j["confusion"] = to_json(res.confusion);
    write_text(out_dir / "report.json", j.dump(2) + "\n");
    write_text(out_dir / "report.txt", report_text(res.report));
    write_text(out_dir / "confusion.csv", confusion_csv(res.confusion));
  }
  return res;
}

PredictResult cmd_predict(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out_dir,
                          Index batch_size, const WarningSink& warn) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  PredictResult res = predict_depth_log(ckpt, read_manifest(manifest), batch_size, warn);
  if (!out_dir.empty()) {
    write_text(out_dir / "depth_log.csv", depth_log_csv(res.logs));
    write_text(out_dir / "depth_log.json", to_json(res.logs).dump(2) + "\n");
  }
  return res;
}

Explanation cmd_explain(const fs::path& checkpoint, const fs::path& tile, const fs::path& out_dir,
                        Index target_class, const LimeConfig& config, std::uint64_t seed) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto net = network_from_checkpoint(ckpt);
  const TensorF x = load_tile_for(ckpt, tile);
  const Explanation e = explain(net, x, target_class, config, RngHandle(seed, fnv1a("lime")));
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    export_explanation(e, x, out_dir / "explanation.png", out_dir / "explanation.json");
  }
  return e;
}

FeatureMapSet cmd_features(const fs::path& checkpoint, const fs::path& tile, const std::vector<std::string>& layers,
                           const fs::path& out_dir, Index filters) {
  if (layers.empty()) throw ParameterError("features: at least one layer is required");
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto net = network_from_checkpoint(ckpt);
  FeatureMapSet maps = extract_feature_maps(net, load_tile_for(ckpt, tile), layers);
  if (!out_dir.empty()) export_feature_maps(maps, out_dir, filters);
  return maps;
}

}  // namespace lithocnn
