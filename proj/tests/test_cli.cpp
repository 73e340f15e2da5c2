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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lithocnn/architectures.hpp"
#include "lithocnn/commands.hpp"
#include "lithocnn/synth.hpp"

using namespace lithocnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lithocnn_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Checkpoint untrained() {
  const Network<float> net(build_alexnet(kLithotypeCount, 3, 0.125), 3);
  return make_checkpoint(net, {{"class_names", lithotype_names()}, {"color_mode", "rgb"}});
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lithocnn");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST(DepthLogCsv, ColumnsAndOrder) {
  DepthLog log;
  log.well_id = "W7";
  log.records.push_back({1.0, 1.1, "granite", 0.75, "limestone", 0.125, "a"});
  const std::string csv = depth_log_csv({log});
  EXPECT_EQ(csv,
            "well_id,depth_top_m,depth_bottom_m,label,confidence,runner_up,runner_up_confidence\n"
            "W7,1,1.1,granite,0.75,limestone,0.125\n");
  EXPECT_NEAR(log.span_m(), 0.1, 1e-12);
}

TEST(Predict, OrderGapsAndEmptyInput) {
  const fs::path dir = scratch("predict");
  auto recs = synth_well(dir, "W1", 6, 100.0, 2);
  std::swap(recs[0], recs[3]);   // out of order
  recs.erase(recs.begin() + 4);  // leaves a gap
  Manifest m;
  m.base_dir = dir;
  m.records = recs;
  std::vector<std::string> warnings;
  const auto res = predict_depth_log(untrained(), m, 4, [&](const std::string& w) { warnings.push_back(w); });
  ASSERT_EQ(res.logs.size(), 1u);
  const auto& r = res.logs[0].records;
  ASSERT_EQ(r.size(), 5u);
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_LT(r[i - 1].depth_top_m, r[i].depth_top_m);
  for (const auto& d : r) {
    EXPECT_GE(d.confidence, d.runner_up_confidence);
    EXPECT_NE(d.label, d.runner_up);
  }
  EXPECT_GE(warnings.size(), 2u);  // unsorted and gap
  EXPECT_EQ(res.throughput.tiles, 5u);

  Manifest empty;
  warnings.clear();
  const auto none = predict_depth_log(untrained(), empty, 4, [&](const std::string& w) { warnings.push_back(w); });
  EXPECT_TRUE(none.logs.empty());
  EXPECT_FALSE(warnings.empty());
}

TEST(Prepare, CutsTilesAndIsIdempotent) {
  const fs::path dir = scratch("prepare");
  std::vector<ManifestRecord> boxes{
      synth_core_image(dir / "raw" / "a.png", "W1", Lithotype::granite, 2, 150.0, 10.0, 1),
      synth_core_image(dir / "raw" / "b.png", "W1", Lithotype::limestone, 1, 150.0, 10.2, 1, 400)};
  boxes[1].id = "W1_box2";
  write_manifest(dir / "raw" / "manifest.jsonl", boxes);
  const auto first = cmd_prepare(dir / "raw" / "manifest.jsonl", dir / "tiles");
  EXPECT_EQ(first.images, 2u);
  EXPECT_EQ(first.tiles, 4u);  // 2 + (1 + bottom-aligned remainder)
  EXPECT_EQ(first.reused, 0u);
  const std::string text = slurp(dir / "tiles" / "manifest.jsonl");
  const auto second = cmd_prepare(dir / "raw" / "manifest.jsonl", dir / "tiles");
  EXPECT_EQ(second.reused, 2u);
  EXPECT_EQ(slurp(dir / "tiles" / "manifest.jsonl"), text);
  const Manifest tiles = read_manifest(dir / "tiles" / "manifest.jsonl");
  EXPECT_EQ(read_image(tiles.resolve(tiles.records[0])).height, kInputExtent);

  write_manifest(dir / "empty.jsonl", {});
  EXPECT_THROW(cmd_prepare(dir / "empty.jsonl", dir / "t2"), DataError);
}

TEST(Augment, ConfigIsRequired) {
  const fs::path dir = scratch("augment");
  write_manifest(dir / "m.jsonl", synth_corpus(dir, {{Lithotype::granite, 2}}, 1, 0, 32));
  EXPECT_THROW(cmd_augment(dir / "m.jsonl", {}, dir / "out", std::nullopt), ParameterError);
  EXPECT_THROW(cmd_augment(dir / "m.jsonl", dir / "nope.json", dir / "out", std::nullopt), ParameterError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(cli({"bogus"}), kExitUsage);
  EXPECT_EQ(cli({"prepare", "--manifest", (dir / "missing.jsonl").string(), "--out", (dir / "o").string()}),
            kExitData);
  EXPECT_EQ(cli({"synth", "--out", (dir / "s").string(), "--per-class", "1", "--size", "32"}), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "s" / "manifest.jsonl"));
  EXPECT_EQ(cli({"augment", "--manifest", (dir / "s" / "manifest.jsonl").string(), "--out", (dir / "a").string()}),
            kExitUsage);
}

TEST(Cli, ExitCodeMapping) {
  const auto code = [](auto thrower) {
    try {
      thrower();
    } catch (...) {
      return exit_code_for_current_exception();
    }
    return -1;
  };
  EXPECT_EQ(code([] { throw NumericError("x"); }), kExitNumeric);
  EXPECT_EQ(code([] { throw DataError("x"); }), kExitData);
  EXPECT_EQ(code([] { throw ParameterError("x"); }), kExitUsage);
  EXPECT_EQ(code([] { throw std::runtime_error("x"); }), 1);
}
