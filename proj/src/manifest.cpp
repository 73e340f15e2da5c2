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

#include "lithocnn/manifest.hpp"

#include <charconv>
#include <fstream>

namespace lithocnn {
namespace {

constexpr std::array<std::string_view, kLithotypeCount> kNames{
    "argillite", "granite", "limestone", "sandstone_laminated", "sandstone_massive", "siltstone"};

constexpr std::array<std::string_view, 9> kKnownKeys{"path",  "well_id",   "depth_top_m", "depth_bottom_m", "dpi",
                                                     "color_mode", "label", "id",          "source_id"};

bool known_key(const std::string& k) {
  for (auto n : kKnownKeys) {
    if (n == k) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(Lithotype label) { return kNames.at(static_cast<std::size_t>(label)); }

Lithotype lithotype_from_code(int code) {
  if (code < 0 || code >= kLithotypeCount) throw DataError("lithotype code out of range: " + std::to_string(code));
  return static_cast<Lithotype>(code);
}

Lithotype lithotype_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Lithotype>(i);
  }
  int code = -1;
  const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), code);
  if (ec == std::errc() && ptr == name.data() + name.size()) return lithotype_from_code(code);
  throw DataError("unknown lithotype '" + std::string(name) + "'");
}

std::vector<std::string> lithotype_names() { return {kNames.begin(), kNames.end()}; }

nlohmann::json to_json(const ManifestRecord& r) {
  nlohmann::json j = r.extra.is_object() ? r.extra : nlohmann::json::object();
  j["path"] = r.path;
  j["well_id"] = r.well_id;
  j["depth_top_m"] = r.depth_top_m;
  j["depth_bottom_m"] = r.depth_bottom_m;
  if (r.dpi) j["dpi"] = *r.dpi;
  j["color_mode"] = to_string(r.color_mode);
  if (r.label) j["label"] = std::string(to_string(*r.label));
  j["id"] = r.id;
  j["source_id"] = r.source_id.empty() ? r.id : r.source_id;
  return j;
}

ManifestRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("manifest record must be a JSON object");
  ManifestRecord r;
  try {
    r.path = j.at("path").get<std::string>();
    r.well_id = j.value("well_id", std::string());
    r.depth_top_m = j.value("depth_top_m", 0.0);
    r.depth_bottom_m = j.value("depth_bottom_m", 0.0);
    if (j.contains("dpi") && !j["dpi"].is_null()) r.dpi = j["dpi"].get<double>();
    r.color_mode = color_mode_from_string(j.value("color_mode", std::string("rgb")));
    if (j.contains("label") && !j["label"].is_null()) {
      const auto& l = j["label"];
      r.label = l.is_number_integer() ? lithotype_from_code(l.get<int>()) : lithotype_from_string(l.get<std::string>());
    }
    r.id = j.value("id", std::string());
    r.source_id = j.value("source_id", r.id);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad manifest record: ") + e.what());
  } catch (const ParameterError& e) {
    throw DataError(std::string("bad manifest record: ") + e.what());
  }
  for (auto& [k, v] : j.items()) {
    if (!known_key(k)) r.extra[k] = v;
  }
  return r;
}

std::filesystem::path Manifest::resolve(const ManifestRecord& r) const {
  const std::filesystem::path p(r.path);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return m;
}

std::string manifest_text(const std::vector<ManifestRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write manifest " + path.string());
  f << manifest_text(records);
  if (!f) throw DataError("failed writing manifest " + path.string());
}

}  // namespace lithocnn
