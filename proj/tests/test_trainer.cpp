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

#include <cmath>
#include <filesystem>
#include <set>

#include "lithocnn/synth.hpp"
#include "lithocnn/trainer.hpp"

using namespace lithocnn;
namespace fs = std::filesystem;

namespace {

std::vector<ManifestRecord> labelled(Index per_class, Index per_source = 1) {
  std::vector<ManifestRecord> out;
  for (int c = 0; c < kLithotypeCount; ++c) {
    for (Index i = 0; i < per_class; ++i) {
      ManifestRecord r;
      r.id = "r" + std::to_string(c) + "_" + std::to_string(i);
      r.source_id = "s" + std::to_string(c) + "_" + std::to_string(i / per_source);
      r.path = r.id + ".png";
      r.label = lithotype_from_code(c);
      out.push_back(r);
    }
  }
  return out;
}

Dataset tiny_set(const std::vector<Lithotype>& classes, Index per_class, Index first) {
  Dataset d;
  for (Lithotype l : classes) {
    for (Index i = first; i < first + per_class; ++i) {
      d.x.push_back(normalize(synth_tile(l, 5, i)));
      d.y.push_back(static_cast<Index>(l));
      d.ids.push_back(std::to_string(static_cast<int>(l)) + "_" + std::to_string(i));
      d.source_ids.push_back(d.ids.back());
    }
  }
  return d;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.width = 0.125;
  c.classes = {"granite", "limestone"};
  c.epochs = 3;
  c.batch_size = 8;
  c.seed = 21;
  c.schedule.kind = LRSchedule::Kind::constant;
  c.schedule.alpha0 = 3e-4;
  return c;
}

}  // namespace

TEST(Split, DefaultRuleCounts) {
  const auto recs = labelled(600);
  const DatasetSplit s = split_dataset(recs, 4);
  std::map<Lithotype, Index> val, test, train;
  for (const auto& r : s.validation) ++val[*r.label];
  for (const auto& r : s.test) ++test[*r.label];
  for (const auto& r : s.train) ++train[*r.label];
  for (int c = 0; c < kLithotypeCount; ++c) {
    const Lithotype l = lithotype_from_code(c);
    const Index d = l == Lithotype::limestone ? 50 : 110;
    EXPECT_EQ(val[l], d);
    EXPECT_EQ(test[l], d);
    EXPECT_EQ(train[l], 600 - 2 * d);
  }
  std::set<std::string> seen;
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (const auto& r : *part) EXPECT_TRUE(seen.insert(r.id).second);
  EXPECT_EQ(seen.size(), recs.size());
}

TEST(Split, SourceGroupsStayTogetherAndSeedMatters) {
  const auto recs = labelled(60, 3);
  SplitRule rule;
  rule.draw = 4;
  rule.overrides.clear();
  const DatasetSplit s = split_dataset(recs, 9, rule);
  std::set<std::string> train_src;
  for (const auto& r : s.train) train_src.insert(r.source_id);
  for (const auto* part : {&s.validation, &s.test})
    for (const auto& r : *part) EXPECT_FALSE(train_src.count(r.source_id));
  EXPECT_EQ(s.validation.size(), 6u * 4 * 3);
  const DatasetSplit again = split_dataset(recs, 9, rule);
  EXPECT_EQ(manifest_text(again.validation), manifest_text(s.validation));
  EXPECT_NE(manifest_text(split_dataset(recs, 10, rule).validation), manifest_text(s.validation));
}

TEST(Split, ShortfallNamesTheClass) {
  auto recs = labelled(30);
  SplitRule rule;
  rule.draw = 15;
  try {
    split_dataset(recs, 1, rule);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("argillite"), std::string::npos);
  }
}

TEST(TrainConfigJson, RoundTrip) {
  TrainConfig c = tiny_config();
  c.optimizer.kind = OptimizerKind::rmsprop;
  c.schedule.kind = LRSchedule::Kind::step;
  c.schedule.boundaries = {3, 7};
  c.stop_train_accuracy = 0.9;
  c.on_the_fly = AugmentationPipeline::defaults(2);
  EXPECT_EQ(to_json(train_config_from_json(to_json(c))), to_json(c));
  nlohmann::json bad = to_json(c);
  bad["epochs"] = 0;
  EXPECT_THROW(train_config_from_json(bad), ParameterError);
  c.classes = {"granite", "granite"};
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Train, DeterministicWithArtifactsAndBestCheckpoint) {
  const std::vector<Lithotype> cls{Lithotype::granite, Lithotype::limestone};
  const Dataset tr = tiny_set(cls, 8, 0), va = tiny_set(cls, 4, 100);
  const fs::path dir = fs::temp_directory_path() / "lithocnn_test_train";
  fs::remove_all(dir);
  const TrainConfig cfg = tiny_config();
  const TrainResult a = train(cfg, tr, va, dir);
  const TrainResult b = train(cfg, tr, va);
  ASSERT_EQ(a.epochs.size(), 3u);
  EXPECT_EQ(encode_checkpoint(a.final), encode_checkpoint(b.final));
  EXPECT_EQ(epoch_stats_csv(a.epochs), epoch_stats_csv(b.epochs));
  double best = -1;
  int best_epoch = -1;
  for (const auto& e : a.epochs) {
    EXPECT_TRUE(std::isfinite(e.train_loss));
    if (e.val_acc > best) best = e.val_acc, best_epoch = e.epoch;
  }
  EXPECT_EQ(a.best_epoch, best_epoch);
  EXPECT_GE(a.best_val_acc, a.epochs.back().val_acc);
  EXPECT_EQ(a.best_val_acc, best);
  for (const char* f : {"best.ckpt", "final.ckpt", "epoch_stats.csv", "run_manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(encode_checkpoint(load_checkpoint(dir / "best.ckpt")), encode_checkpoint(a.best));
  EXPECT_EQ(checkpoint_classes(a.best), cfg.classes);

  // The stored best checkpoint reproduces the recorded validation accuracy.
  const auto ev = evaluate(network_from_checkpoint(a.best), va, cfg.classes);
  EXPECT_DOUBLE_EQ(ev.report.accuracy, a.best_val_acc);
}

TEST(Train, CallbackStopsAndLeakageIsRefused) {
  const std::vector<Lithotype> cls{Lithotype::granite, Lithotype::limestone};
  const Dataset tr = tiny_set(cls, 4, 0), va = tiny_set(cls, 2, 50);
  int calls = 0;
  const auto r = train(tiny_config(), tr, va, {}, {}, [&](const EpochStats&) { return ++calls < 2; });
  EXPECT_EQ(r.epochs.size(), 2u);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_THROW(train(tiny_config(), tr, tr), DataError);
}

TEST(Train, NonFiniteLossAborts) {
  const std::vector<Lithotype> cls{Lithotype::granite, Lithotype::limestone};
  Dataset tr = tiny_set(cls, 4, 0);
  const Dataset va = tiny_set(cls, 2, 50);
  for (auto& x : tr.x) x[0] = std::nanf("");
  EXPECT_THROW(train(tiny_config(), tr, va), NumericError);
}

TEST(Train, UnknownClassIsADataError) {
  const Dataset tr = tiny_set({Lithotype::granite, Lithotype::siltstone}, 2, 0);
  const Dataset va = tiny_set({Lithotype::granite}, 2, 50);
  EXPECT_THROW(train(tiny_config(), tr, va), DataError);
}
