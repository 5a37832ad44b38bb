// Copyright 2026 The voxid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/testing.hpp"
#include "voxid/checkpoint.hpp"
#include "voxid/errors.hpp"
#include "voxid/model.hpp"

namespace {

namespace md = voxid::model;
namespace nn = voxid::nn;
using md::LayerKind;
using voxid::features::FeatureKind;

std::vector<std::size_t> conv_filters(const md::ModelSpec& s) {
  std::vector<std::size_t> f;
  for (const auto& l : s.layers) {
    if (l.kind == LayerKind::kConv2d) f.push_back(l.filters);
  }
  return f;
}

std::string expect_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const voxid::Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("model-1 preset is the fifteen-layer reference stack") {
  const auto s = md::preset("model-1", 285);
  REQUIRE(s.layers.size() == 15);
  const std::vector<LayerKind> kinds{
      LayerKind::kConv2d,   LayerKind::kActivation, LayerKind::kConv2d,
      LayerKind::kActivation, LayerKind::kMaxpool, LayerKind::kConv2d,
      LayerKind::kActivation, LayerKind::kMaxpool, LayerKind::kReshapeToSequence,
      LayerKind::kLstm,     LayerKind::kFlatten,    LayerKind::kBatchnorm,
      LayerKind::kDropout,  LayerKind::kDense,      LayerKind::kSoftmax};
  for (std::size_t i = 0; i < 15; ++i) CHECK(s.layers[i].kind == kinds[i]);
  CHECK(conv_filters(s) == std::vector<std::size_t>{32, 64, 64});
  CHECK(s.layers[9].units == 64);
  CHECK(s.layers[12].rate == 0.3);
  CHECK(s.layers[13].neurons == 285);
}

TEST_CASE("best differs from model-1 in exactly two fields") {
  const auto a = md::preset("model-1", 285);
  const auto b = md::preset("best", 285);
  REQUIRE(a.layers.size() == b.layers.size());
  std::vector<std::size_t> differing;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (!(a.layers[i] == b.layers[i])) differing.push_back(i);
  }
  REQUIRE(differing == std::vector<std::size_t>{1, 12});
  CHECK(b.layers[1].activation == nn::Activation::kTanh);
  CHECK(b.layers[12].rate == 0.4);
  auto patched = b.layers[1];
  patched.activation = nn::Activation::kRelu;
  CHECK(patched == a.layers[1]);
  patched = b.layers[12];
  patched.rate = 0.3;
  CHECK(patched == a.layers[12]);
}

TEST_CASE("variant deltas") {
  const auto m1 = md::preset("model-1", 10);
  const auto m5 = md::preset("model-5", 10);
  const auto f1 = conv_filters(m1);
  const auto f5 = conv_filters(m5);
  REQUIRE(f1.size() == f5.size());
  for (std::size_t i = 0; i < f1.size(); ++i) CHECK(f5[i] < f1[i]);

  const auto m2 = md::preset("model-2", 10);
  CHECK(conv_filters(m2) == std::vector<std::size_t>{64, 128, 128, 128});

  std::size_t lstms = 0;
  for (const auto& l : md::preset("model-3", 10).layers) {
    if (l.kind == LayerKind::kLstm) {
      ++lstms;
      CHECK(l.units == 128);
    }
  }
  CHECK(lstms == 2);

  std::size_t dense = 0;
  for (const auto& l : md::preset("model-4", 10).layers) dense += l.kind == LayerKind::kDense;
  CHECK(dense == 2);

  const auto m6 = md::preset("model-6", 10);
  for (std::size_t i = 0; i < m6.layers.size(); ++i) {
    if (m6.layers[i].kind == LayerKind::kConv2d) {
      CHECK(m6.layers[i + 1].kind == LayerKind::kActivation);
      CHECK(m6.layers[i + 2].kind == LayerKind::kBatchnorm);
    }
  }

  const auto msg = expect_error([] { md::preset("model-9", 10); });
  CHECK(msg.find("model-1") != std::string::npos);
  CHECK(msg.find("best") != std::string::npos);
  CHECK_THROWS_AS(md::preset("model-1", 1), voxid::ConfigError);
}

TEST_CASE("model-1 shape trace on 64x298 mel input") {
  const auto trace = md::trace_shapes(md::preset("model-1", 285), 64, 298);
  const std::vector<std::pair<std::string, nn::Shape>> want{
      {"conv1", {62, 296, 32}}, {"act1", {62, 296, 32}},   {"conv2", {60, 294, 64}},
      {"act2", {60, 294, 64}},  {"pool1", {30, 147, 64}},  {"conv3", {28, 145, 64}},
      {"act3", {28, 145, 64}},  {"pool2", {14, 72, 64}},   {"reshape1", {72, 896}},
      {"lstm1", {72, 64}},      {"flatten1", {4608}},      {"bn1", {4608}},
      {"dropout1", {4608}},     {"dense1", {285}},         {"softmax1", {285}}};
  REQUIRE(trace.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(trace[i].layer == want[i].first);
    CHECK(trace[i].shape == want[i].second);
  }
}

TEST_CASE("mfcc input and underflowing inputs") {
  const auto spec = md::preset("model-1", 285, FeatureKind::kMfcc);
  const auto trace = md::trace_shapes(spec, 13, 298);
  CHECK(trace[0].shape == nn::Shape{11, 296, 32});
  CHECK(trace[2].shape == nn::Shape{9, 294, 64});
  // floor(9 / 2) = 4 rows after the first pool.
  CHECK(trace[4].shape == nn::Shape{4, 147, 64});

  const auto tiny = expect_error([] { md::trace_shapes(md::preset("model-1", 285), 64, 2); });
  CHECK(tiny.find("conv1") != std::string::npos);
  CHECK(tiny.find("[64x2x1]") != std::string::npos);

  const auto narrow = expect_error([] { md::trace_shapes(md::preset("model-1", 285), 64, 10); });
  CHECK(narrow.find("pool2") != std::string::npos);
  CHECK(narrow.find("[28x1x64]") != std::string::npos);
  CHECK_THROWS_AS(md::trace_shapes(md::preset("model-1", 285), 64, 2), voxid::BuildError);
  CHECK_NOTHROW(md::trace_shapes(md::preset("model-1", 285), 64, 12));
}

TEST_CASE("every preset builds on both feature shapes") {
  for (const auto& name : md::preset_names()) {
    for (const auto kind : {FeatureKind::kMelSpectrogram, FeatureKind::kMfcc}) {
      const std::size_t bands = kind == FeatureKind::kMfcc ? 13 : 64;
      const auto spec = md::preset(name, 7, kind);
      md::Network<float> net(spec, bands, 298, 1);
      CHECK(net.shape_trace().back().shape == nn::Shape{7});
      CHECK(spec.layers.back().kind == LayerKind::kSoftmax);
      CHECK(spec.layers[spec.layers.size() - 2].neurons == 7);
    }
  }
}

TEST_CASE("parameter counts") {
  auto count = [](const std::string& name) {
    return md::Network<float>(md::preset(name, 285), 64, 298, 0).trainable_parameter_count();
  };
  // conv 320 + 18496 + 36928, lstm 4*64*(896+64+1), bn 2*4608, dense 4608*285+285
  CHECK(count("model-1") == 320 + 18496 + 36928 + 246016 + 9216 + 1313565);
  CHECK(count("best") == count("model-1"));
  CHECK(count("model-5") < count("model-1"));
  CHECK(count("model-1") < count("model-2"));
}

TEST_CASE("spec json round-trip and parse errors") {
  for (const auto& name : md::preset_names()) {
    const auto s = md::preset(name, 285);
    CHECK(md::parse_spec(md::serialize_spec(s)) == s);
  }
  auto text = md::serialize_spec(md::preset("model-1", 285));
  auto conv3d = text;
  conv3d.replace(conv3d.find("\"conv2d\""), 8, "\"conv3d\"");
  const auto bad_kind = expect_error([&] { md::parse_spec(conv3d); });
  CHECK(bad_kind.find("kind") != std::string::npos);
  CHECK(bad_kind.find("conv3d") != std::string::npos);

  auto no_units = text;
  const auto pos = no_units.find("\"units\": 64");
  REQUIRE(pos != std::string::npos);
  no_units.erase(pos, std::string("\"units\": 64").size());
  // Drop the dangling comma left before the removed member.
  const auto comma = no_units.rfind(',', pos);
  no_units.erase(comma, 1);
  const auto missing = expect_error([&] { md::parse_spec(no_units); });
  CHECK(missing.find("missing units") != std::string::npos);
  CHECK_THROWS_AS(md::parse_spec(no_units), voxid::ParseError);
  CHECK_THROWS_AS(md::parse_spec("{"), voxid::ParseError);
}

TEST_CASE("validation rejects malformed stacks") {
  auto s = md::preset("model-1", 5);
  s.layers.erase(s.layers.begin() + 8);  // the reshape
  CHECK_THROWS_AS(md::validate(s), voxid::ConfigError);
  s = md::preset("model-1", 5);
  s.layers[13].neurons = 6;
  CHECK_THROWS_AS(md::validate(s), voxid::ConfigError);
}

TEST_CASE("network forward, weights export and checkpoint round-trip") {
  voxid::testing::TempDir dir("model");
  md::Network<float> net(md::preset("model-5", 4), 16, 40, 3);
  nn::Tape<float> tape;
  const auto x = nn::Tensor<float>::filled({2, 16, 40, 1}, 0.1f);
  const auto probs = net.forward(tape, x, nn::Mode::kInfer, 0);
  CHECK(probs.shape() == nn::Shape{2, 4});
  CHECK_THROWS_AS(net.forward(tape, nn::Tensor<float>::zeros({1, 15, 40, 1}), nn::Mode::kInfer, 0),
                  voxid::ShapeError);

  // Same seed, same weights; different seed, different weights.
  md::Network<float> twin(md::preset("model-5", 4), 16, 40, 3);
  md::Network<float> other(md::preset("model-5", 4), 16, 40, 4);
  CHECK(twin.export_weights() == net.export_weights());
  CHECK(!(other.export_weights() == net.export_weights()));

  const auto arrays = net.export_weights();
  CHECK(arrays.front().name == "conv1.kernel");
  nn::write_vxw(dir / "w.vxw", arrays);
  CHECK(voxid::read_file(dir / "w.vxw").substr(0, 4) == "VXW1");
  const auto back = nn::read_vxw(dir / "w.vxw");
  CHECK(back == arrays);
  other.import_weights(back);
  CHECK(other.export_weights() == arrays);

  auto wrong = back;
  wrong.pop_back();
  CHECK_THROWS_AS(other.import_weights(wrong), voxid::ShapeError);
  CHECK_THROWS_AS(nn::decode_vxw("VXW0"), voxid::Error);
}

TEST_CASE("shipped preset files match the built-in presets") {
  for (const auto& name : md::preset_names()) {
    INFO(name);
    const auto text = voxid::read_file(std::string(VOXID_MODELS_DIR) + "/" + name + ".json");
    CHECK(md::parse_spec(text) == md::preset(name, 285));
    CHECK(md::serialize_spec(md::preset(name, 285)) == text);
  }
}
