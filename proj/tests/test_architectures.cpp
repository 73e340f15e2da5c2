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

#include <array>

#include "lithocnn/architectures.hpp"
#include "lithocnn/checkpoint.hpp"
#include "lithocnn/network.hpp"
#include "oracles.hpp"

using namespace lithocnn;

namespace {

std::map<std::string, Shape> law_shapes(const NetworkGraph& g) {
  std::map<std::string, Shape> all;
  oracle::walk_shapes(g.layers, g.input_shape, all);
  return all;
}

void expect_shape_law(const NetworkGraph& g) {
  const auto expected = law_shapes(g);
  for (const auto& s : g.infer_shapes()) {
    ASSERT_TRUE(expected.count(s.name)) << s.name;
    EXPECT_EQ(s.shape, expected.at(s.name)) << g.architecture << " " << s.name;
  }
}

}  // namespace

TEST(Architectures, ShapeLawAtFullWidth) {
  for (Index ch : {1, 3}) {
    for (const std::string& arch : architecture_ids()) {
      const NetworkGraph g = build_architecture(arch, 6, ch);
      expect_shape_law(g);
      EXPECT_EQ(g.output_shape(), Shape{6});
      EXPECT_EQ(g.input_shape, (Shape{ch, kInputExtent, kInputExtent}));
      EXPECT_NO_THROW(g.validate_classifier());
    }
  }
}

TEST(Architectures, AlexNetLayerCountsAndGeometry) {
  const NetworkGraph g = build_alexnet(6, 3);
  EXPECT_EQ(g.count(LayerKind::conv), 5u);
  EXPECT_EQ(g.count(LayerKind::dense), 3u);
  const auto shapes = law_shapes(g);
  EXPECT_EQ(shapes.at("conv1"), (Shape{96, 55, 55}));
  EXPECT_EQ(shapes.at("conv5"), (Shape{256, 13, 13}));
  EXPECT_EQ(shapes.at("fc6"), Shape{4096});
  EXPECT_EQ(shapes.at("fc8"), Shape{6});
}

TEST(Architectures, VggVariantsConvCounts) {
  const std::map<std::string, std::size_t> convs{{"vgg11", 8}, {"vgg13", 10}, {"vgg16", 13}, {"vgg19", 16}};
  for (const auto& [v, n] : convs) {
    const NetworkGraph g = build_vgg(6, 3, v);
    EXPECT_EQ(g.count(LayerKind::conv), n) << v;
    EXPECT_EQ(g.count(LayerKind::dense), 3u) << v;
  }
  EXPECT_THROW(build_vgg(6, 3, "vgg12"), ParameterError);
}

TEST(Architectures, ModulesComposeChannels) {
  const NetworkGraph g = build_googlenet(6, 3);
  EXPECT_EQ(g.count(LayerKind::inception), 9u);
  const auto shapes = law_shapes(g);
  EXPECT_EQ(shapes.at("inception_3a")[0], 256);
  EXPECT_EQ(shapes.at("inception_5b")[0], 1024);

  const NetworkGraph r = build_resnet(6, 3, "resnet34");
  EXPECT_EQ(r.count(LayerKind::residual), 16u);
  EXPECT_EQ(build_resnet(6, 3, "resnet18").count(LayerKind::residual), 8u);
}

TEST(Architectures, RejectsBadArguments) {
  EXPECT_THROW(build_alexnet(1, 3), ParameterError);
  EXPECT_THROW(build_alexnet(6, 2), ParameterError);
  EXPECT_THROW(build_alexnet(6, 3, 0.0), ParameterError);
  EXPECT_THROW(build_alexnet(6, 3, 1.5), ParameterError);
  EXPECT_THROW(build_architecture("lenet", 6, 3), ParameterError);
}

TEST(Architectures, RuntimeActivationsMatchNodeCounts) {
  for (const std::string& arch : architecture_ids()) {
    const NetworkGraph g = build_architecture(arch, 6, 3, "", 0.125);
    const Network<float> net(g, 1);
    const auto names = g.layer_names();
    TensorF out;
    const auto acts = net.capture(TensorF(Shape{1, 3, kInputExtent, kInputExtent}, 0.5f), names, &out);
    for (const auto& s : g.infer_shapes()) {
      ASSERT_TRUE(acts.count(s.name)) << s.name;
      EXPECT_EQ(acts.at(s.name).size(), node_count(s.shape)) << arch << " " << s.name;
    }
    EXPECT_EQ(out.shape(), (Shape{1, 6}));
  }
}

TEST(Architectures, ReducedAlexNetParameterCount) {
  const Network<float> net(build_alexnet(6, 3, 0.125), 0);
  Index n = 0;
  for (const auto& p : net.parameters()) {
    if (p.trainable) n += p.value.size();
  }
  EXPECT_EQ(n, 918582);
}

TEST(Network, InitializationIsSeededAndScaled) {
  const Network<float> a(build_alexnet(6, 3, 0.125), 42), b(build_alexnet(6, 3, 0.125), 42),
      c(build_alexnet(6, 3, 0.125), 43);
  EXPECT_EQ(a.parameter("conv1/kernel"), b.parameter("conv1/kernel"));
  EXPECT_NE(a.parameter("conv1/kernel"), c.parameter("conv1/kernel"));
  const auto& k = a.parameter("conv2/kernel");
  const double fan_in = static_cast<double>(k.dim(1) * k.dim(2) * k.dim(3));
  const double sd = std::sqrt(k.vector().cast<double>().squaredNorm() / static_cast<double>(k.size()));
  EXPECT_NEAR(sd, std::sqrt(2.0 / fan_in), 0.1 * std::sqrt(2.0 / fan_in));
  EXPECT_TRUE(a.parameter("conv1/bias").vector().isZero());
}

TEST(Network, PredictIsPureAndRowsAreDistributions) {
  Network<float> net(build_resnet(6, 3, "resnet18", 0.125), 3);
  const TensorF x(Shape{2, 3, kInputExtent, kInputExtent}, 0.25f);
  const TensorF p1 = net.predict(x), p2 = net.predict(x);
  EXPECT_EQ(p1, p2);
  for (Index r = 0; r < 2; ++r) {
    double s = 0;
    for (Index c = 0; c < 6; ++c) s += p1(r, c);
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
  EXPECT_THROW(net.predict(TensorF(Shape{1, 3, 100, 100})), DimensionError);
}

TEST(Network, LossGradientsDriveDescent) {
  // A few plain gradient steps on one batch must lower its loss.
  Network<float> net(build_alexnet(3, 1, 0.0625), 9);
  TensorF x(Shape{3, 1, kInputExtent, kInputExtent});
  for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>((i % 97) / 97.0);
  const std::vector<Index> y{0, 1, 2};
  const double first = net.loss_and_gradients(x, y, RngHandle(), Mode::infer).loss;
  for (int step = 0; step < 5; ++step) {
    auto g = net.loss_and_gradients(x, y, RngHandle(), Mode::infer);
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      if (net.parameters()[i].trainable) net.parameters()[i].value.vector() -= 0.01f * g.grads[i].vector();
    }
  }
  EXPECT_LT(net.loss_and_gradients(x, y, RngHandle(), Mode::infer).loss, first);
}

TEST(Graph, JsonRoundTrip) {
  for (const std::string& arch : architecture_ids()) {
    const NetworkGraph g = build_architecture(arch, 4, 1, "", 0.25);
    const NetworkGraph back = graph_from_json(to_json(g));
    EXPECT_EQ(to_json(back), to_json(g));
  }
}

TEST(Checkpoint, RoundTripBitExact) {
  const Network<float> net(build_googlenet(6, 1, 0.125), 5);
  const Checkpoint c = make_checkpoint(net, {{"note", "x"}});
  const auto bytes = encode_checkpoint(c);
  const Checkpoint d = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(d), bytes);
  const Network<float> back = network_from_checkpoint(d);
  const TensorF x(Shape{1, 1, kInputExtent, kInputExtent}, 0.3f);
  EXPECT_EQ(back.predict(x), net.predict(x));
  EXPECT_EQ(d.descriptor["note"], "x");
}

TEST(Checkpoint, CorruptionAndVersionAreDetected) {
  const Network<float> net(build_alexnet(6, 3, 0.0625), 5);
  auto bytes = encode_checkpoint(make_checkpoint(net));
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  EXPECT_THROW(decode_checkpoint(flipped), CheckpointError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 9);
  EXPECT_THROW(decode_checkpoint(truncated), CheckpointError);
  auto versioned = bytes;
  versioned[4] = 9;  // version field follows the 4-byte magic
  EXPECT_THROW(decode_checkpoint(versioned), CheckpointError);
  Network<float> other(build_alexnet(6, 3, 0.125), 5);
  EXPECT_THROW(restore(other, decode_checkpoint(bytes)), CheckpointError);
}

namespace {

NetworkGraph single_module_graph(Index channels, LayerSpec module) {
  NetworkGraph g;
  g.architecture = "probe";
  g.input_shape = {channels, 6, 6};
  g.classes = 2;
  g.layers = {std::move(module), global_avg_pool_layer("gap"), dense_layer("fc", 2), softmax_layer("prob")};
  return g;
}

}  // namespace

TEST(Modules, ResidualWithZeroBranchIsReluOfInput) {
  Network<float> net(single_module_graph(4, build_residual_module("res", 4, 4, 1)), 3);
  for (auto& p : net.parameters()) {
    if (p.name.rfind("res/", 0) == 0 && p.trainable) p.value.vector().setZero();
  }
  std::mt19937_64 g(4);
  const TensorF x = tensor_cast<float>(oracle::random_tensor({2, 4, 6, 6}, g));
  const std::vector<std::string> layers{"res"};
  EXPECT_EQ(net.capture(x, layers).at("res"), relu(x));
}

TEST(Modules, InceptionChannelsAreBranchSum) {
  const std::array<Index, 4> widths{3, 4, 2, 1};
  const Network<float> net(single_module_graph(5, build_inception_module("inc", 5, widths)), 3);
  const std::vector<std::string> layers{"inc"};
  const auto y = net.capture(TensorF(Shape{1, 5, 6, 6}, 0.3f), layers).at("inc");
  EXPECT_EQ(y.shape(), (Shape{1, 10, 6, 6}));
}

TEST(Graph, SerializedGraphForwardsBitwise) {
  for (const std::string& arch : architecture_ids()) {
    const Network<float> net(build_architecture(arch, 6, 3, "", 0.125), 12);
    Network<float> back(graph_from_json(to_json(net.graph())), 99);
    back.parameters() = net.parameters();
    const TensorF x(Shape{1, 3, kInputExtent, kInputExtent}, 0.25f);
    EXPECT_EQ(back.predict(x), net.predict(x)) << arch;
  }
}
