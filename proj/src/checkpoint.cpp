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

#include "lithocnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "lithocnn/architectures.hpp"

namespace lithocnn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[4] = {'L', 'C', 'N', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  void bytes(void* dst, std::size_t n) {
    if (n > n_ - pos_) throw CheckpointError("checkpoint truncated");
    std::memcpy(dst, p_ + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > n_ - pos_) throw CheckpointError("checkpoint truncated");
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == n_; }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace

nlohmann::json describe(const NetworkGraph& graph) {
  return {{"variant", graph.variant},
          {"width", graph.width},
          {"in_channels", graph.input_shape.at(0)},
          {"classes", graph.classes}};
}

Checkpoint make_checkpoint(const Network<float>& net, nlohmann::json extra) {
  Checkpoint c;
  c.architecture = net.graph().architecture;
  c.descriptor = describe(net.graph());
  for (auto& [k, v] : extra.items()) c.descriptor[k] = v;
  for (const auto& p : net.parameters()) c.tensors.emplace_back(p.name, p.value);
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(ckpt.architecture);
  w.str(ckpt.descriptor.dump());
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.bytes(t.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
  }
  auto& buf = w.buffer();
  const std::uint32_t crc = crc_of(buf.data(), buf.size());
  w.u32(crc);
  return std::move(buf);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (crc_of(bytes.data(), bytes.size() - 4) != stored) throw CheckpointError("checkpoint CRC mismatch");
  Reader r(bytes.data() + 4, bytes.size() - 8);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.architecture = r.str();
  try {
    c.descriptor = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint descriptor: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw CheckpointError("implausible tensor rank in checkpoint");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    TensorF t(shape);
    r.bytes(t.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void restore(Network<float>& net, const Checkpoint& ckpt) {
  auto& params = net.parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, network expects " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = ckpt.tensors[i];
    if (name != params[i].name || t.shape() != params[i].value.shape()) {
      throw CheckpointError("checkpoint tensor '" + name + "' " + shape_string(t.shape()) + " does not match '" +
                            params[i].name + "' " + shape_string(params[i].value.shape()));
    }
    params[i].value = t;
  }
}

Network<float> network_from_checkpoint(const Checkpoint& ckpt) {
  const auto& d = ckpt.descriptor;
  NetworkGraph g;
  try {
    g = build_architecture(ckpt.architecture, d.at("classes").get<Index>(), d.at("in_channels").get<Index>(),
                           d.at("variant").get<std::string>(),
                           d.at("width").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint descriptor: ") + e.what());
  }
  Network<float> net(std::move(g));
  restore(net, ckpt);
  return net;
}

}  // namespace lithocnn
