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

#include "voxid/model.hpp"

#include <cmath>
#include <map>
#include <random>

#include "json.hpp"
#include "voxid/errors.hpp"
#include "voxid/util.hpp"

namespace voxid::model {

using nn::Activation;
using nn::Padding;
using nn::Shape;
using json = nlohmann::ordered_json;

namespace {

const std::map<std::string_view, LayerKind>& kind_names() {
  static const std::map<std::string_view, LayerKind> names = {
      {"conv2d", LayerKind::kConv2d},
      {"activation", LayerKind::kActivation},
      {"maxpool", LayerKind::kMaxpool},
      {"reshape_to_sequence", LayerKind::kReshapeToSequence},
      {"lstm", LayerKind::kLstm},
      {"flatten", LayerKind::kFlatten},
      {"batchnorm", LayerKind::kBatchnorm},
      {"dropout", LayerKind::kDropout},
      {"dense", LayerKind::kDense},
      {"softmax", LayerKind::kSoftmax},
  };
  return names;
}

// Short per-kind prefix used for layer and parameter names.
std::string_view layer_prefix(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv";
    case LayerKind::kActivation: return "act";
    case LayerKind::kMaxpool: return "pool";
    case LayerKind::kReshapeToSequence: return "reshape";
    case LayerKind::kLstm: return "lstm";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kBatchnorm: return "bn";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "layer";
}

std::vector<std::string> layer_names(const ModelSpec& spec) {
  std::map<LayerKind, int> counters;
  std::vector<std::string> names;
  for (const auto& l : spec.layers) {
    names.push_back(std::string(layer_prefix(l.kind)) + std::to_string(++counters[l.kind]));
  }
  return names;
}

ModelSpec model1_layers(std::string name, std::size_t num_classes,
                        features::FeatureKind kind, std::array<std::size_t, 3> filters) {
  ModelSpec s;
  s.name = std::move(name);
  s.num_classes = num_classes;
  s.input_kind = kind;
  s.layers = {
      LayerSpec::conv(filters[0]),        LayerSpec::act(Activation::kRelu),
      LayerSpec::conv(filters[1]),        LayerSpec::act(Activation::kRelu),
      LayerSpec::pool(),                  LayerSpec::conv(filters[2]),
      LayerSpec::act(Activation::kRelu),  LayerSpec::pool(),
      LayerSpec::to_sequence(),           LayerSpec::lstm(64),
      LayerSpec::flatten(),               LayerSpec::batchnorm(),
      LayerSpec::dropout(0.3),            LayerSpec::dense(num_classes),
      LayerSpec::softmax(),
  };
  return s;
}

std::size_t index_of(const ModelSpec& s, LayerKind kind, std::size_t nth = 0) {
  for (std::size_t i = 0; i < s.layers.size(); ++i) {
    if (s.layers[i].kind == kind && nth-- == 0) return i;
  }
  throw ConfigError("preset construction: layer kind not found");
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [name, k] : kind_names()) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::string_view to_string(Activation act) {
  return act == Activation::kRelu ? "relu" : "tanh";
}

LayerSpec LayerSpec::conv(std::size_t filters, Padding padding) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.filters = filters;
  l.padding = padding;
  return l;
}
LayerSpec LayerSpec::act(Activation a) {
  LayerSpec l;
  l.kind = LayerKind::kActivation;
  l.activation = a;
  return l;
}
LayerSpec LayerSpec::pool() {
  LayerSpec l;
  l.kind = LayerKind::kMaxpool;
  return l;
}
LayerSpec LayerSpec::to_sequence() {
  LayerSpec l;
  l.kind = LayerKind::kReshapeToSequence;
  return l;
}
LayerSpec LayerSpec::lstm(std::size_t units) {
  LayerSpec l;
  l.kind = LayerKind::kLstm;
  l.units = units;
  return l;
}
LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::kFlatten;
  return l;
}
LayerSpec LayerSpec::batchnorm() {
  LayerSpec l;
  l.kind = LayerKind::kBatchnorm;
  return l;
}
LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::kDropout;
  l.rate = rate;
  return l;
}
LayerSpec LayerSpec::dense(std::size_t neurons) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.neurons = neurons;
  return l;
}
LayerSpec LayerSpec::softmax() {
  LayerSpec l;
  l.kind = LayerKind::kSoftmax;
  return l;
}

void validate(const ModelSpec& spec) {
  const std::string who = "model spec '" + spec.name + "': ";
  if (spec.num_classes < 2) throw ConfigError(who + "num_classes must be at least 2");
  const auto& L = spec.layers;
  if (L.size() < 2 || L.back().kind != LayerKind::kSoftmax ||
      L[L.size() - 2].kind != LayerKind::kDense ||
      L[L.size() - 2].neurons != spec.num_classes) {
    throw ConfigError(who + "must end with dense(" + std::to_string(spec.num_classes) +
                      ") followed by softmax");
  }
  std::size_t reshapes = 0;
  std::size_t reshape_at = 0;
  std::size_t first_lstm = L.size();
  for (std::size_t i = 0; i < L.size(); ++i) {
    const auto& l = L[i];
    const std::string at = who + "layer " + std::to_string(i) + " (" +
                           std::string(to_string(l.kind)) + "): ";
    switch (l.kind) {
      case LayerKind::kConv2d:
        if (l.filters == 0 || l.kernel[0] == 0 || l.kernel[1] == 0) {
          throw ConfigError(at + "filters and kernel must be positive");
        }
        break;
      case LayerKind::kLstm:
        if (l.units == 0) throw ConfigError(at + "units must be positive");
        first_lstm = std::min(first_lstm, i);
        break;
      case LayerKind::kDropout:
        if (!(l.rate >= 0.0 && l.rate < 1.0)) throw ConfigError(at + "rate must be in [0, 1)");
        break;
      case LayerKind::kDense:
        if (l.neurons == 0) throw ConfigError(at + "neurons must be positive");
        break;
      case LayerKind::kReshapeToSequence:
        ++reshapes;
        reshape_at = i;
        break;
      default:
        break;
    }
  }
  if (reshapes != 1) {
    throw ConfigError(who + "expected exactly one reshape_to_sequence layer, found " +
                      std::to_string(reshapes));
  }
  if (first_lstm == L.size() || reshape_at > first_lstm) {
    throw ConfigError(who + "reshape_to_sequence must precede the first lstm layer");
  }
}

std::vector<std::string> preset_names() {
  return {"model-1", "model-2", "model-3", "model-4", "model-5", "model-6", "best"};
}

ModelSpec preset(std::string_view name, std::size_t num_classes,
                 features::FeatureKind input_kind) {
  const std::string n(name);
  ModelSpec s;
  if (n == "model-1") {
    s = model1_layers(n, num_classes, input_kind, {32, 64, 64});
  } else if (n == "model-2") {
    // Deeper extractor: wider filters plus a fourth conv block before the
    // reshape. The extra block pads so that 13-band MFCC input still builds.
    s = model1_layers(n, num_classes, input_kind, {64, 128, 128});
    const auto at = static_cast<std::ptrdiff_t>(index_of(s, LayerKind::kReshapeToSequence));
    s.layers.insert(s.layers.begin() + at,
                    {LayerSpec::conv(128, Padding::kSame), LayerSpec::act(Activation::kRelu)});
  } else if (n == "model-3") {
    s = model1_layers(n, num_classes, input_kind, {32, 64, 64});
    const auto at = index_of(s, LayerKind::kLstm);
    s.layers[at].units = 128;
    s.layers.insert(s.layers.begin() + static_cast<std::ptrdiff_t>(at) + 1, LayerSpec::lstm(128));
  } else if (n == "model-4") {
    s = model1_layers(n, num_classes, input_kind, {32, 64, 64});
    const auto at = static_cast<std::ptrdiff_t>(index_of(s, LayerKind::kDropout)) + 1;
    s.layers.insert(s.layers.begin() + at,
                    {LayerSpec::dense(128), LayerSpec::act(Activation::kRelu)});
  } else if (n == "model-5") {
    s = model1_layers(n, num_classes, input_kind, {16, 32, 32});
  } else if (n == "model-6") {
    s = model1_layers(n, num_classes, input_kind, {32, 64, 64});
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
      if (s.layers[i].kind == LayerKind::kConv2d) {
        // conv, activation, then batchnorm
        s.layers.insert(s.layers.begin() + static_cast<std::ptrdiff_t>(i) + 2,
                        LayerSpec::batchnorm());
      }
    }
  } else if (n == "best") {
    s = model1_layers(n, num_classes, input_kind, {32, 64, 64});
    s.layers[index_of(s, LayerKind::kActivation)].activation = Activation::kTanh;
    s.layers[index_of(s, LayerKind::kDropout)].rate = 0.4;
  } else {
    std::string valid;
    for (const auto& p : preset_names()) valid += (valid.empty() ? "" : ", ") + p;
    throw ConfigError("unknown model preset '" + n + "'; valid presets: " + valid);
  }
  validate(s);
  return s;
}

std::vector<std::size_t> activation_slots(const ModelSpec& spec) {
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::kActivation) slots.push_back(i);
  }
  return slots;
}

std::string serialize_spec(const ModelSpec& spec) {
  json j;
  j["schema"] = "voxid.model-spec";
  j["version"] = kSpecSchemaVersion;
  j["name"] = spec.name;
  j["num_classes"] = spec.num_classes;
  j["input_kind"] = std::string(features::to_string(spec.input_kind));
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json o;
    o["kind"] = std::string(to_string(l.kind));
    switch (l.kind) {
      case LayerKind::kConv2d:
        o["filters"] = l.filters;
        o["kernel"] = {l.kernel[0], l.kernel[1]};
        o["padding"] = l.padding == Padding::kValid ? "valid" : "same";
        break;
      case LayerKind::kActivation:
        o["activation"] = std::string(to_string(l.activation));
        break;
      case LayerKind::kMaxpool:
        o["pool"] = {2, 2};
        break;
      case LayerKind::kLstm:
        o["units"] = l.units;
        break;
      case LayerKind::kDropout:
        o["rate"] = l.rate;
        break;
      case LayerKind::kDense:
        o["neurons"] = l.neurons;
        break;
      default:
        break;
    }
    layers.push_back(std::move(o));
  }
  j["layers"] = std::move(layers);
  return j.dump(2) + "\n";
}

ModelSpec parse_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model spec is not valid JSON: ") + e.what());
  }
  auto require = [](const json& obj, const std::string& key, const std::string& path) -> const json& {
    if (!obj.is_object() || !obj.contains(key)) {
      throw ParseError(path + "." + key + ": missing " + key);
    }
    return obj.at(key);
  };
  auto as_size = [](const json& v, const std::string& path) -> std::size_t {
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
      throw ParseError(path + ": expected a positive integer");
    }
    return v.get<std::size_t>();
  };
  auto as_string = [](const json& v, const std::string& path) -> std::string {
    if (!v.is_string()) throw ParseError(path + ": expected a string");
    return v.get<std::string>();
  };

  if (j.contains("version") && j["version"] != kSpecSchemaVersion) {
    throw ParseError("$.version: unsupported schema version " + j["version"].dump());
  }
  ModelSpec s;
  s.name = as_string(require(j, "name", "$"), "$.name");
  s.num_classes = as_size(require(j, "num_classes", "$"), "$.num_classes");
  try {
    s.input_kind = features::parse_feature_kind(
        as_string(require(j, "input_kind", "$"), "$.input_kind"));
  } catch (const ParseError& e) {
    throw ParseError(std::string("$.input_kind: ") + e.what());
  }
  const json& layers = require(j, "layers", "$");
  if (!layers.is_array()) throw ParseError("$.layers: expected an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string path = "$.layers[" + std::to_string(i) + "]";
    const json& o = layers[i];
    const std::string kind = as_string(require(o, "kind", path), path + ".kind");
    const auto it = kind_names().find(kind);
    if (it == kind_names().end()) {
      throw ParseError(path + ".kind: unknown layer kind '" + kind + "'");
    }
    LayerSpec l;
    l.kind = it->second;
    switch (l.kind) {
      case LayerKind::kConv2d: {
        l.filters = as_size(require(o, "filters", path), path + ".filters");
        if (o.contains("kernel")) {
          const json& k = o["kernel"];
          if (!k.is_array() || k.size() != 2) {
            throw ParseError(path + ".kernel: expected [height, width]");
          }
          l.kernel = {as_size(k[0], path + ".kernel[0]"), as_size(k[1], path + ".kernel[1]")};
        }
        if (o.contains("padding")) {
          const std::string p = as_string(o["padding"], path + ".padding");
          if (p == "valid") {
            l.padding = Padding::kValid;
          } else if (p == "same") {
            l.padding = Padding::kSame;
          } else {
            throw ParseError(path + ".padding: expected 'valid' or 'same'");
          }
        }
        break;
      }
      case LayerKind::kActivation: {
        const std::string a = as_string(require(o, "activation", path), path + ".activation");
        if (a == "relu") {
          l.activation = Activation::kRelu;
        } else if (a == "tanh") {
          l.activation = Activation::kTanh;
        } else {
          throw ParseError(path + ".activation: expected 'relu' or 'tanh', got '" + a + "'");
        }
        break;
      }
      case LayerKind::kMaxpool:
        if (o.contains("pool") && o["pool"] != json::array({2, 2})) {
          throw ParseError(path + ".pool: only [2, 2] pooling is supported");
        }
        break;
      case LayerKind::kLstm:
        l.units = as_size(require(o, "units", path), path + ".units");
        break;
      case LayerKind::kDropout: {
        const json& r = require(o, "rate", path);
        if (!r.is_number()) throw ParseError(path + ".rate: expected a number");
        l.rate = r.get<double>();
        break;
      }
      case LayerKind::kDense:
        l.neurons = as_size(require(o, "neurons", path), path + ".neurons");
        break;
      default:
        break;
    }
    s.layers.push_back(l);
  }
  try {
    validate(s);
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  return s;
}

std::vector<ShapeTraceEntry> trace_shapes(const ModelSpec& spec, std::size_t bands,
                                          std::size_t frames) {
  validate(spec);
  if (bands == 0 || frames == 0) throw BuildError("input shape must be positive");
  const auto names = layer_names(spec);
  std::vector<ShapeTraceEntry> trace;
  Shape cur{bands, frames, 1};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    auto fail = [&](const std::string& why) {
      throw BuildError("layer " + std::to_string(i) + " '" + names[i] + "' (" +
                       std::string(to_string(l.kind)) + "): incoming shape " +
                       nn::shape_string(cur) + " " + why);
    };
    auto need_rank = [&](std::size_t r) {
      if (cur.size() != r) fail("has the wrong rank (expected " + std::to_string(r) + ")");
    };
    switch (l.kind) {
      case LayerKind::kConv2d:
        need_rank(3);
        if (l.padding == Padding::kValid) {
          if (cur[0] < l.kernel[0] || cur[1] < l.kernel[1]) {
            fail("is smaller than the " + std::to_string(l.kernel[0]) + "x" +
                 std::to_string(l.kernel[1]) + " kernel");
          }
          cur = {cur[0] - l.kernel[0] + 1, cur[1] - l.kernel[1] + 1, l.filters};
        } else {
          cur = {cur[0], cur[1], l.filters};
        }
        break;
      case LayerKind::kMaxpool:
        need_rank(3);
        if (cur[0] < 2 || cur[1] < 2) fail("cannot be pooled 2x2");
        cur = {cur[0] / 2, cur[1] / 2, cur[2]};
        break;
      case LayerKind::kReshapeToSequence:
        need_rank(3);
        cur = {cur[1], cur[0] * cur[2]};
        break;
      case LayerKind::kLstm:
        need_rank(2);
        cur = {cur[0], l.units};
        break;
      case LayerKind::kFlatten:
        cur = {nn::shape_size(cur)};
        break;
      case LayerKind::kDense:
        need_rank(1);
        cur = {l.neurons};
        break;
      default:
        break;
    }
    trace.push_back({names[i], cur});
  }
  return trace;
}

// --- Network ------------------------------------------------------------------

template <typename T>
std::size_t Network<T>::add_param(std::string name, Shape shape, bool trainable) {
  params_.push_back({std::move(name), nn::Tensor<T>::zeros(std::move(shape), trainable), trainable});
  return params_.size() - 1;
}

template <typename T>
Network<T>::Network(ModelSpec spec, std::size_t bands, std::size_t frames, std::uint64_t seed)
    : spec_(std::move(spec)), bands_(bands), frames_(frames) {
  trace_ = trace_shapes(spec_, bands, frames);
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](nn::Tensor<T>& t, double limit) {
    for (auto& v : t.mutable_data()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
  };

  Shape in{bands, frames, 1};
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    Runtime rt{l.kind, trace_[i].layer, {}};
    const std::string& nm = rt.name;
    switch (l.kind) {
      case LayerKind::kConv2d: {
        const std::size_t cin = in[2];
        const auto k = add_param(nm + ".kernel", {l.kernel[0], l.kernel[1], cin, l.filters}, true);
        const auto b = add_param(nm + ".bias", {l.filters}, true);
        const std::size_t area = l.kernel[0] * l.kernel[1];
        fill_uniform(params_[k].value, glorot_limit(area * cin, area * l.filters));
        rt.params = {k, b};
        break;
      }
      case LayerKind::kLstm: {
        const std::size_t f = in[1], u = l.units;
        const auto k = add_param(nm + ".kernel", {f, 4 * u}, true);
        const auto r = add_param(nm + ".recurrent", {u, 4 * u}, true);
        const auto b = add_param(nm + ".bias", {4 * u}, true);
        fill_uniform(params_[k].value, glorot_limit(f, 4 * u));
        fill_uniform(params_[r].value, 1.0 / std::sqrt(static_cast<double>(u)));
        auto bias = params_[b].value.mutable_data();
        for (std::size_t j = u; j < 2 * u; ++j) bias[j] = T(1);  // forget gate
        rt.params = {k, r, b};
        break;
      }
      case LayerKind::kBatchnorm: {
        const std::size_t f = in.back();
        const auto g = add_param(nm + ".gamma", {f}, true);
        const auto b = add_param(nm + ".beta", {f}, true);
        const auto m = add_param(nm + ".running_mean", {f}, false);
        const auto v = add_param(nm + ".running_var", {f}, false);
        for (auto& x : params_[g].value.mutable_data()) x = T(1);
        for (auto& x : params_[v].value.mutable_data()) x = T(1);
        rt.params = {g, b, m, v};
        break;
      }
      case LayerKind::kDense: {
        const std::size_t f = in[0];
        const auto w = add_param(nm + ".kernel", {f, l.neurons}, true);
        const auto b = add_param(nm + ".bias", {l.neurons}, true);
        fill_uniform(params_[w].value, glorot_limit(f, l.neurons));
        rt.params = {w, b};
        break;
      }
      default:
        break;
    }
    layers_.push_back(std::move(rt));
    in = trace_[i].shape;
  }
}

template <typename T>
nn::Tensor<T> Network<T>::forward(nn::Tape<T>& tape, const nn::Tensor<T>& input,
                                  nn::Mode mode, std::uint64_t dropout_seed) {
  const Shape expected{input.shape().empty() ? 0 : input.dim(0), bands_, frames_, 1};
  if (input.shape() != expected) {
    throw ShapeError("network '" + spec_.name + "' expects input [Bx" + std::to_string(bands_) +
                     "x" + std::to_string(frames_) + "x1], got " + nn::shape_string(input.shape()));
  }
  const std::size_t batch = input.dim(0);
  nn::Tensor<T> x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& rt = layers_[i];
    const auto& l = spec_.layers[i];
    auto p = [&](std::size_t j) -> nn::Tensor<T>& { return params_[rt.params[j]].value; };
    switch (rt.kind) {
      case LayerKind::kConv2d:
        x = nn::conv2d(tape, x, p(0), p(1), l.padding);
        break;
      case LayerKind::kActivation:
        x = nn::activation(tape, x, l.activation);
        break;
      case LayerKind::kMaxpool:
        x = nn::maxpool2d(tape, x);
        break;
      case LayerKind::kReshapeToSequence:
        x = nn::feature_map_to_sequence(tape, x);
        break;
      case LayerKind::kLstm:
        x = nn::lstm_sequence(tape, x, nn::LstmParams<T>{p(0), p(1), p(2)});
        break;
      case LayerKind::kFlatten:
        x = nn::reshape(tape, x, {batch, x.size() / batch});
        break;
      case LayerKind::kBatchnorm: {
        nn::BatchNormState<T> state{p(2), p(3)};
        x = nn::batchnorm(tape, x, p(0), p(1), state, mode);
        break;
      }
      case LayerKind::kDropout:
        x = nn::dropout(tape, x, l.rate, mode, derive_seed(dropout_seed, i));
        break;
      case LayerKind::kDense:
        x = nn::dense(tape, x, p(0), p(1));
        break;
      case LayerKind::kSoftmax:
        break;
    }
  }
  return x;
}

template <typename T>
std::size_t Network<T>::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <typename T>
std::vector<std::vector<T>> Network<T>::snapshot() const {
  std::vector<std::vector<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

template <typename T>
void Network<T>::restore(const std::vector<std::vector<T>>& values) {
  if (values.size() != params_.size()) throw StateError("snapshot does not match network");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].value.mutable_data();
    if (values[i].size() != dst.size()) throw StateError("snapshot does not match network");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

template <typename T>
std::vector<nn::NamedArray> Network<T>::export_weights() const {
  std::vector<nn::NamedArray> out;
  for (const auto& p : params_) {
    nn::NamedArray a{p.name, p.value.shape(), {}};
    a.values.reserve(p.value.size());
    for (T v : p.value.data()) a.values.push_back(static_cast<float>(v));
    out.push_back(std::move(a));
  }
  return out;
}

template <typename T>
void Network<T>::import_weights(const std::vector<nn::NamedArray>& arrays) {
  if (arrays.size() != params_.size()) {
    throw ShapeError("checkpoint has " + std::to_string(arrays.size()) +
                     " tensors but the network has " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = arrays[i];
    auto& p = params_[i];
    if (a.name != p.name || a.shape != p.value.shape()) {
      throw ShapeError("checkpoint tensor '" + a.name + "' " + nn::shape_string(a.shape) +
                       " does not match network tensor '" + p.name + "' " +
                       nn::shape_string(p.value.shape()));
    }
    auto dst = p.value.mutable_data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(a.values[k]);
  }
}

template <typename T>
nn::Tensor<T> make_batch(std::span<const features::FeatureMatrix* const> items) {
  if (items.empty()) throw InvalidArgumentError("empty batch");
  const std::size_t bands = items.front()->bands();
  const std::size_t frames = items.front()->frames();
  std::vector<T> data;
  data.reserve(items.size() * bands * frames);
  for (const auto* m : items) {
    if (m->bands() != bands || m->frames() != frames) {
      throw ShapeError("batch mixes feature shapes " + std::to_string(bands) + "x" +
                       std::to_string(frames) + " and " + std::to_string(m->bands()) + "x" +
                       std::to_string(m->frames()));
    }
    for (double v : m->values.data) data.push_back(static_cast<T>(v));
  }
  return nn::Tensor<T>({items.size(), bands, frames, 1}, std::move(data));
}

template class Network<float>;
template class Network<double>;
template nn::Tensor<float> make_batch(std::span<const features::FeatureMatrix* const>);
template nn::Tensor<double> make_batch(std::span<const features::FeatureMatrix* const>);

}  // namespace voxid::model
