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

#include "lithocnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "lithocnn/architectures.hpp"

namespace lithocnn {
namespace {

std::vector<Index> class_index_map(const std::vector<std::string>& names) {
  std::vector<Index> map(kLithotypeCount, -1);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto code = static_cast<std::size_t>(lithotype_from_string(names[i]));
    if (map[code] >= 0) throw ParameterError("duplicate class '" + names[i] + "'");
    map[code] = static_cast<Index>(i);
  }
  return map;
}

std::vector<Index> mapped_labels(const Dataset& d, const std::vector<Index>& map, const char* what) {
  std::vector<Index> out;
  out.reserve(d.y.size());
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    const Index m = map.at(static_cast<std::size_t>(d.y[i]));
    if (m < 0) {
      throw DataError(std::string(what) + " tile '" + d.ids[i] + "' has class " +
                      std::string(to_string(static_cast<Lithotype>(d.y[i]))) + ", which the model does not know");
    }
    out.push_back(m);
  }
  return out;
}

TensorF stack(const Dataset& d, std::span<const std::size_t> idx) {
  const TensorF& first = d.x.at(idx[0]);
  Shape shape{static_cast<Index>(idx.size())};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  TensorF batch(shape);
  const Index n = first.size();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const TensorF& t = d.x[idx[k]];
    if (t.shape() != first.shape()) throw DimensionError("tiles in a batch differ in shape");
    batch.vector().segment(static_cast<Index>(k) * n, n) = t.vector();
  }
  return batch;
}

Index argmax_row(const TensorF& probs, Index row, Index* runner_up = nullptr) {
  const Index k = probs.dim(1);
  Index best = 0;
  for (Index j = 1; j < k; ++j) {
    if (probs(row, j) > probs(row, best)) best = j;
  }
  if (runner_up) {
    Index second = best == 0 ? 1 : 0;
    for (Index j = 0; j < k; ++j) {
      if (j != best && probs(row, j) > probs(row, second)) second = j;
    }
    *runner_up = second;
  }
  return best;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

}  // namespace

Index SplitRule::draw_for(Lithotype label) const {
  auto it = overrides.find(label);
  return it == overrides.end() ? draw : it->second;
}

DatasetSplit split_dataset(const std::vector<ManifestRecord>& records, std::uint64_t seed, const SplitRule& rule) {
  // Group by provenance so every derivative of a tile stays with it.
  std::map<Lithotype, std::vector<std::string>> groups;
  std::map<std::string, std::vector<const ManifestRecord*>> members;
  for (const auto& r : records) {
    if (!r.label) throw DataError("split_dataset: record '" + r.id + "' has no label");
    const std::string src = r.source_id.empty() ? r.id : r.source_id;
    auto& m = members[src];
    if (m.empty()) groups[*r.label].push_back(src);
    if (!m.empty() && *m.front()->label != *r.label) throw DataError("source '" + src + "' carries two labels");
    m.push_back(&r);
  }
  std::string shortfall;
  for (int code = 0; code < kLithotypeCount; ++code) {
    const auto label = static_cast<Lithotype>(code);
    const Index need = 2 * rule.draw_for(label) + 1;
    const Index have = groups.count(label) ? static_cast<Index>(groups[label].size()) : 0;
    if (have < need) {
      shortfall += (shortfall.empty() ? "" : ", ") + std::string(to_string(label)) + " has " + std::to_string(have) +
                   " (needs " + std::to_string(need) + ")";
    }
  }
  if (!shortfall.empty()) throw DataError("split_dataset: class shortfall: " + shortfall);

  DatasetSplit split;
  for (auto& [label, srcs] : groups) {
    std::sort(srcs.begin(), srcs.end());
    RngHandle rng(seed, static_cast<std::uint64_t>(label));
    shuffle(srcs, rng);
    const auto draw = static_cast<std::size_t>(rule.draw_for(label));
    for (std::size_t i = 0; i < srcs.size(); ++i) {
      auto& part = i < draw ? split.validation : (i < 2 * draw ? split.test : split.train);
      for (const auto* r : members[srcs[i]]) part.push_back(*r);
    }
  }
  return split;
}

Dataset load_dataset(const Manifest& manifest, const std::vector<ManifestRecord>& records, ColorMode mode) {
  Dataset d;
  d.x.resize(records.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      d.x[i] = load_tile(manifest.resolve(records[i]), mode);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw DataError(error);
  for (const auto& r : records) {
    d.y.push_back(r.label ? static_cast<Index>(*r.label) : -1);
    d.ids.push_back(r.id);
    d.source_ids.push_back(r.source_id.empty() ? r.id : r.source_id);
  }
  return d;
}

Dataset load_dataset(const Manifest& manifest, ColorMode mode) { return load_dataset(manifest, manifest.records, mode); }

void TrainConfig::validate() const {
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  if (classes.size() < 2) throw ParameterError("at least two classes are required");
  (void)class_index_map(classes);
  schedule.validate();
  if (on_the_fly) on_the_fly->validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"architecture", c.architecture},
                   {"variant", c.variant},
                   {"width", c.width},
                   {"color_mode", to_string(c.color)},
                   {"optimizer",
                    {{"kind", to_string(c.optimizer.kind)},
                     {"beta1", c.optimizer.beta1},
                     {"beta2", c.optimizer.beta2},
                     {"epsilon", c.optimizer.epsilon},
                     {"decay", c.optimizer.decay},
                     {"momentum", c.optimizer.momentum}}},
                   {"schedule",
                    {{"kind", to_string(c.schedule.kind)},
                     {"alpha0", c.schedule.alpha0},
                     {"power", c.schedule.power},
                     {"ep_max", c.schedule.ep_max},
                     {"boundaries", c.schedule.boundaries},
                     {"factor", c.schedule.factor}}},
                   {"epochs", c.epochs},
                   {"batch_size", c.batch_size},
                   {"seed", c.seed},
                   {"classes", c.classes},
                   {"stop_train_accuracy", c.stop_train_accuracy},
                   {"stop_val_accuracy", c.stop_val_accuracy}};
  if (c.on_the_fly) j["on_the_fly_augmentation"] = to_json(*c.on_the_fly);
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.architecture = j.value("architecture", c.architecture);
    c.variant = j.value("variant", c.variant);
    c.width = j.value("width", c.width);
    c.color = color_mode_from_string(j.value("color_mode", std::string("rgb")));
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      c.optimizer.kind = optimizer_kind_from_string(o.value("kind", std::string("adam")));
      c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
      c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
      c.optimizer.epsilon = o.value("epsilon", c.optimizer.epsilon);
      c.optimizer.decay = o.value("decay", c.optimizer.decay);
      c.optimizer.momentum = o.value("momentum", c.optimizer.momentum);
    }
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      c.schedule.kind = schedule_kind_from_string(s.value("kind", std::string("step")));
      c.schedule.alpha0 = s.value("alpha0", c.schedule.alpha0);
      c.schedule.power = s.value("power", c.schedule.power);
      c.schedule.ep_max = s.value("ep_max", c.schedule.ep_max);
      c.schedule.boundaries = s.value("boundaries", c.schedule.boundaries);
      c.schedule.factor = s.value("factor", c.schedule.factor);
    }
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.classes = j.value("classes", c.classes);
    c.stop_train_accuracy = j.value("stop_train_accuracy", c.stop_train_accuracy);
    c.stop_val_accuracy = j.value("stop_val_accuracy", c.stop_val_accuracy);
    if (j.contains("on_the_fly_augmentation")) c.on_the_fly = pipeline_from_json(j["on_the_fly_augmentation"]);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("bad training config: ") + e.what());
  } catch (const DataError& e) {
    throw ParameterError(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string epoch_stats_csv(const std::vector<EpochStats>& stats) {
  std::string out = "epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
  char buf[256];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.epoch, s.lr, s.train_loss, s.train_acc,
                  s.val_loss, s.val_acc);
    out += buf;
  }
  return out;
}

EvalResult evaluate(const Network<float>& net, const Dataset& data, const std::vector<std::string>& class_names,
                    Index batch_size) {
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  const auto map = class_index_map(class_names);
  const auto labels = mapped_labels(data, map, "evaluation");
  EvalResult res;
  res.confusion = ConfusionMatrix(static_cast<Index>(class_names.size()), class_names);
  double loss = 0;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(static_cast<std::size_t>(batch_size), idx.size() - start);
    const std::span<const std::size_t> part(idx.data() + start, n);
    const TensorF probs = net.predict(stack(data, part));
    for (std::size_t k = 0; k < n; ++k) {
      const Index row = static_cast<Index>(k);
      const Index pred = argmax_row(probs, row);
      const Index truth = labels[start + k];
      res.confusion.add(truth, pred);
      res.predicted.push_back(pred);
      loss -= std::log(std::max(static_cast<double>(probs(row, truth)), kProbabilityFloor));
    }
  }
  res.mean_loss = loss / static_cast<double>(data.size());
  res.report = classification_report(res.confusion);
  return res;
}

std::vector<std::string> checkpoint_classes(const Checkpoint& ckpt) {
  if (ckpt.descriptor.contains("class_names")) return ckpt.descriptor["class_names"].get<std::vector<std::string>>();
  return lithotype_names();
}

ColorMode checkpoint_color(const Checkpoint& ckpt) {
  if (ckpt.descriptor.contains("color_mode")) return color_mode_from_string(ckpt.descriptor["color_mode"]);
  return ckpt.descriptor.value("in_channels", Index{3}) == 1 ? ColorMode::gray : ColorMode::rgb;
}

EvalResult evaluate(const Checkpoint& ckpt, const Manifest& manifest, Index batch_size) {
  if (manifest.records.empty()) throw DataError("evaluate: empty manifest");
  const auto net = network_from_checkpoint(ckpt);
  return evaluate(net, load_dataset(manifest, checkpoint_color(ckpt)), checkpoint_classes(ckpt), batch_size);
}

std::string records_digest(const std::vector<ManifestRecord>& records) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(manifest_text(records))));
  return buf;
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& val_set,
                  const std::filesystem::path& out_dir, const nlohmann::json& provenance,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() == 0) throw DataError("train: empty training set");
  if (val_set.size() == 0) throw DataError("train: empty validation set");
  const auto map = class_index_map(config.classes);
  const auto train_labels = mapped_labels(train_set, map, "training");
  (void)mapped_labels(val_set, map, "validation");

  // Provenance guard: nothing derived from a validation tile may train.
  {
    std::set<std::string> held(val_set.source_ids.begin(), val_set.source_ids.end());
    held.insert(val_set.ids.begin(), val_set.ids.end());
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      if (held.count(train_set.source_ids[i]) || held.count(train_set.ids[i])) {
        throw DataError("train: tile '" + train_set.ids[i] + "' derives from held-out source '" +
                        train_set.source_ids[i] + "'");
      }
    }
  }

  const Index in_channels = channels_of(config.color);
  NetworkGraph graph = build_architecture(config.architecture, static_cast<Index>(config.classes.size()), in_channels,
                                          config.variant, config.width);
  const bool has_bn = graph.count(LayerKind::batch_norm) > 0;
  Network<float> net(std::move(graph), hash_combine(config.seed, fnv1a("init")));
  auto state = make_optimizer_state<float>(config.optimizer, net.parameters());

  const nlohmann::json extra{{"class_names", config.classes}, {"color_mode", to_string(config.color)}};
  TrainResult result;
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.schedule.at(epoch);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    RngHandle shuffler(config.seed, hash_combine(fnv1a("shuffle"), static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffler);

    double loss_sum = 0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
      const std::size_t n = std::min(bs, order.size() - start);
      if (n == 1 && has_bn && start > 0) break;  // batch statistics need two samples
      const std::span<const std::size_t> part(order.data() + start, n);
      TensorF batch = stack(train_set, part);
      if (config.on_the_fly) {
        const Index sz = train_set.x[part[0]].size();
        for (std::size_t k = 0; k < n; ++k) {
          const TensorF aug = config.on_the_fly->apply(
              train_set.x[part[k]],
              config.on_the_fly->variant_rng(train_set.ids[part[k]], static_cast<std::uint64_t>(epoch) + 1));
          batch.vector().segment(static_cast<Index>(k) * sz, sz) = aug.vector();
        }
      }
      std::vector<Index> labels;
      for (auto i : part) labels.push_back(train_labels[i]);
      RngHandle drop(config.seed, hash_combine(hash_combine(fnv1a("dropout"), static_cast<std::uint64_t>(epoch)), b));
      auto g = net.loss_and_gradients(batch, labels, drop, Mode::train);
      if (!std::isfinite(g.loss)) {
        std::string norms;
        const auto& params = net.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (!params[i].trainable) continue;
          char buf[128];
          std::snprintf(buf, sizeof buf, "%s%s=%.6g", norms.empty() ? "" : ", ", params[i].name.c_str(),
                        static_cast<double>(g.grads[i].vector().norm()));
          norms += buf;
        }
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           ", lr " + std::to_string(lr) + "; gradient norms: " + norms);
      }
      optimizer_step(net.parameters(), g.grads, state, lr);
      loss_sum += g.loss * static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) correct += argmax_row(g.probs, static_cast<Index>(k)) == labels[k];
      seen += n;
    }

    const EvalResult val = evaluate(net, val_set, config.classes, config.batch_size);
    EpochStats s;
    s.epoch = epoch;
    s.lr = lr;
    s.train_loss = loss_sum / static_cast<double>(seen);
    s.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    s.val_loss = val.mean_loss;
    s.val_acc = val.report.accuracy;
    result.epochs.push_back(s);

    if (s.val_acc > result.best_val_acc) {
      result.best_val_acc = s.val_acc;
      result.best_epoch = epoch;
      nlohmann::json e = extra;
      e["epoch"] = epoch;
      result.best = make_checkpoint(net, e);
    }
    const bool train_ok = config.stop_train_accuracy <= 0 || s.train_acc >= config.stop_train_accuracy;
    const bool val_ok = config.stop_val_accuracy <= 0 || s.val_acc >= config.stop_val_accuracy;
    const bool stop_rule = (config.stop_train_accuracy > 0 || config.stop_val_accuracy > 0) && train_ok && val_ok;
    const bool keep_going = on_epoch ? on_epoch(s) : true;
    if (stop_rule || !keep_going) {
      result.stopped_early = epoch + 1 < config.epochs;
      break;
    }
  }
  nlohmann::json e = extra;
  e["epoch"] = result.epochs.back().epoch;
  result.final = make_checkpoint(net, e);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    save_checkpoint(out_dir / "best.ckpt", result.best);
    save_checkpoint(out_dir / "final.ckpt", result.final);
    write_text(out_dir / "epoch_stats.csv", epoch_stats_csv(result.epochs));
    nlohmann::json run{{"config", to_json(config)},
                       {"seed", config.seed},
                       {"train_tiles", train_set.size()},
                       {"validation_tiles", val_set.size()},
                       {"epochs_run", result.epochs.size()},
                       {"best_epoch", result.best_epoch},
                       {"best_val_acc", result.best_val_acc},
                       {"stopped_early", result.stopped_early},
                       {"provenance", provenance.is_null() ? nlohmann::json::object() : provenance}};
    write_text(out_dir / "run_manifest.json", run.dump(2) + "\n");
  }
  return result;
}

}  // namespace lithocnn
