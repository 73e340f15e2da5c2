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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "lithocnn/commands.hpp"
#include "lithocnn/synth.hpp"

namespace lithocnn {
namespace {

namespace fs = std::filesystem;

void print_warning(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

nlohmann::json read_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ParameterError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError("bad JSON in " + path.string() + ": " + e.what());
  }
}

std::map<Lithotype, Index> parse_counts(const std::string& spec, Index per_class) {
  std::map<Lithotype, Index> counts;
  for (int c = 0; c < kLithotypeCount; ++c) counts[static_cast<Lithotype>(c)] = per_class;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParameterError("expected class=count, got '" + item + "'");
    counts[lithotype_from_string(item.substr(0, eq))] = std::stol(item.substr(eq + 1));
  }
  return counts;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Lithotype classification of core images with convolutional networks"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may also follow the subcommand
  std::uint64_t seed = 0;
  bool seed_given = false;
  fs::path config_path;
  int threads = 0;
  std::string color;
  app.add_option("--seed", seed, "Seed for every stochastic step")->each([&](const std::string&) { seed_given = true; });
  app.add_option("--config", config_path, "JSON config (train: training config, augment: pipeline config)");
  app.add_option("--threads", threads, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--color", color, "Color regime")->check(CLI::IsMember({"rgb", "gray"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic tile corpus, well or set of core images");
  fs::path synth_out;
  Index per_class = 60, first_index = 0, size = 227, well_tiles = 0, box_tiles = 0, boxes = 1;
  std::string counts, well_id = "WELL-1";
  double top = 0, dpi = 150;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--per-class", per_class, "Tiles per class");
  synth->add_option("--counts", counts, "Per-class overrides, e.g. limestone=120,granite=80");
  synth->add_option("--first-index", first_index, "First tile index (selects a disjoint sample)");
  synth->add_option("--size", size, "Tile edge in px");
  synth->add_option("--well", well_id, "Well id");
  synth->add_option("--well-tiles", well_tiles, "Write one well of this many consecutive tiles instead");
  synth->add_option("--top", top, "Top depth of the well in m");
  synth->add_option("--box-tiles", box_tiles, "Write core images of this many tiles per class instead");
  synth->add_option("--boxes", boxes, "Core images per class (with --box-tiles)");
  synth->add_option("--dpi", dpi, "Core image resolution (with --box-tiles)");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Cut core images into normalized tiles");
  fs::path prep_manifest, prep_out;
  PrepareOptions prep_opts;
  prepare->add_option("--manifest", prep_manifest, "Core image manifest")->required();
  prepare->add_option("--out", prep_out, "Output directory")->required();
  prepare->add_option("--tile-cm", prep_opts.tile_cm, "Tile edge in cm");

  // split
  auto* split = app.add_subcommand("split", "Draw validation and test sets per class");
  fs::path split_manifest, split_out;
  SplitRule rule;
  Index limestone_draw = rule.draw_for(Lithotype::limestone);
  split->add_option("--manifest", split_manifest, "Tile manifest")->required();
  split->add_option("--out", split_out, "Output directory")->required();
  split->add_option("--draw", rule.draw, "Tiles per class drawn for validation and for test");
  split->add_option("--limestone-draw", limestone_draw, "Draw for limestone");

  // augment
  auto* augment = app.add_subcommand("augment", "Materialize an oversampled training corpus");
  fs::path aug_manifest, aug_out;
  augment->add_option("--manifest", aug_manifest, "Training manifest")->required();
  augment->add_option("--out", aug_out, "Output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a network");
  TrainPaths paths;
  int epochs = 0;
  train_cmd->add_option("--train", paths.train_manifest, "Training manifest")->required();
  train_cmd->add_option("--val", paths.val_manifest, "Validation manifest")->required();
  train_cmd->add_option("--out", paths.out_dir, "Output directory")->required();
  train_cmd->add_option("--epochs", epochs, "Override the configured epoch count");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labelled manifest");
  fs::path eval_ckpt, eval_manifest, eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint")->required();
  eval->add_option("--manifest", eval_manifest, "Labelled manifest")->required();
  eval->add_option("--out", eval_out, "Report directory");

  // predict
  auto* predict = app.add_subcommand("predict", "Classify the tiles of a well into a depth log");
  fs::path pred_ckpt, pred_manifest, pred_out;
  Index batch = 16;
  predict->add_option("--checkpoint", pred_ckpt, "Checkpoint")->required();
  predict->add_option("--manifest", pred_manifest, "Well tile manifest")->required();
  predict->add_option("--out", pred_out, "Output directory")->required();
  predict->add_option("--batch", batch, "Tiles per inference batch");

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "Local surrogate explanation of one tile");
  fs::path ex_ckpt, ex_tile, ex_out;
  Index ex_class = -1;
  LimeConfig lime;
  explain_cmd->add_option("--checkpoint", ex_ckpt, "Checkpoint")->required();
  explain_cmd->add_option("--tile", ex_tile, "Tile image")->required();
  explain_cmd->add_option("--out", ex_out, "Output directory")->required();
  explain_cmd->add_option("--class", ex_class, "Class index to explain (default: predicted class)");
  explain_cmd->add_option("--grid", lime.grid, "Regions per side");
  explain_cmd->add_option("--samples", lime.samples, "Perturbation samples");
  explain_cmd->add_option("--sigma", lime.sigma, "Kernel width");
  explain_cmd->add_option("--top-k", lime.top_k, "Regions in the mask");

  // features
  auto* features = app.add_subcommand("features", "Export feature maps of named layers");
  fs::path fm_ckpt, fm_tile, fm_out;
  std::vector<std::string> layers;
  Index filters = 4;
  features->add_option("--checkpoint", fm_ckpt, "Checkpoint")->required();
  features->add_option("--tile", fm_tile, "Tile image")->required();
  features->add_option("--layers", layers, "Layer names")->required()->delimiter(',');
  features->add_option("--out", fm_out, "Output directory")->required();
  features->add_option("--filters", filters, "Filters exported per layer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    if (*synth) {
      if (well_tiles > 0) {
        const auto recs = synth_well(synth_out, well_id, well_tiles, top, seed, size);
        write_manifest(synth_out / "manifest.jsonl", recs);
        std::printf("wrote well %s: %zu tiles\n", well_id.c_str(), recs.size());
      } else if (box_tiles > 0) {
        std::vector<ManifestRecord> recs;
        for (int c = 0; c < kLithotypeCount; ++c) {
          const auto label = static_cast<Lithotype>(c);
          for (Index b = 0; b < boxes; ++b) {
            const std::string w = well_id + "_" + std::string(to_string(label)) + "_" + std::to_string(b);
            recs.push_back(synth_core_image(synth_out / (w + ".png"), w, label, box_tiles, dpi, top, seed));
          }
        }
        write_manifest(synth_out / "manifest.jsonl", recs);
        std::printf("wrote %zu core images\n", recs.size());
      } else {
        const auto recs = synth_corpus(synth_out, parse_counts(counts, per_class), seed, first_index, size);
        write_manifest(synth_out / "manifest.jsonl", recs);
        std::printf("wrote %zu tiles\n", recs.size());
      }
    } else if (*prepare) {
      const auto s = cmd_prepare(prep_manifest, prep_out, prep_opts, print_warning);
      std::printf("%zu images, %zu tiles (%zu images unchanged)\n", s.images, s.tiles, s.reused);
    } else if (*split) {
      rule.overrides[Lithotype::limestone] = limestone_draw;
      const auto s = cmd_split(split_manifest, split_out, seed, rule);
      std::printf("train %zu, validation %zu, test %zu\n", s.train.size(), s.validation.size(), s.test.size());
    } else if (*augment) {
      const auto recs = cmd_augment(aug_manifest, config_path, aug_out, seed_given ? std::optional(seed) : std::nullopt);
      std::printf("wrote %zu tiles\n", recs.size());
    } else if (*train_cmd) {
      TrainConfig cfg = config_path.empty() ? TrainConfig{} : train_config_from_json(read_config(config_path));
      if (seed_given) cfg.seed = seed;
      if (!color.empty()) cfg.color = color_mode_from_string(color);
      if (epochs > 0) cfg.epochs = epochs;
      const auto res = cmd_train(cfg, paths, [](const EpochStats& s) {
        std::printf("epoch %d lr %.3g loss %.4f acc %.4f val_loss %.4f val_acc %.4f\n", s.epoch, s.lr, s.train_loss,
                    s.train_acc, s.val_loss, s.val_acc);
        std::fflush(stdout);
        return true;
      });
      std::printf("best epoch %d, validation accuracy %.4f\n", res.best_epoch, res.best_val_acc);
    } else if (*eval) {
      const auto res = cmd_eval(eval_ckpt, eval_manifest, eval_out);
      std::printf("%s", report_text(res.report).c_str());
    } else if (*predict) {
      const auto res = cmd_predict(pred_ckpt, pred_manifest, pred_out, batch, print_warning);
      for (const auto& log : res.logs) {
        std::printf("well %s: %zu tiles, %.1f m\n", log.well_id.c_str(), log.records.size(), log.span_m());
      }
      std::printf("throughput: %.2f tiles/s, %.1f m/min (%zu tiles in %.2f s)\n", res.throughput.tiles_per_second(),
                  res.throughput.meters_per_minute(), res.throughput.tiles, res.throughput.seconds);
    } else if (*explain_cmd) {
      const auto e = cmd_explain(ex_ckpt, ex_tile, ex_out, ex_class, lime, seed);
      std::printf("class %lld, %zu regions%s\n", static_cast<long long>(e.explained_class), e.regions.size(),
                  e.uninformative ? " (model output constant over samples)" : "");
    } else if (*features) {
      const auto maps = cmd_features(fm_ckpt, fm_tile, layers, fm_out, filters);
      std::printf("exported %zu layers\n", maps.layers.size());
    }
  } catch (const std::exception& e) {
    const int rc = exit_code_for_current_exception();
    std::cerr << "error: " << e.what() << "\n";
    return rc;
  }
  return kExitOk;
}

}  // namespace lithocnn
