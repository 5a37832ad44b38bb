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

// Declarative CNN-LSTM architectures and the executable networks built from
// them.

#ifndef VOXID_MODEL_HPP_
#define VOXID_MODEL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "voxid/checkpoint.hpp"
#include "voxid/features.hpp"
#include "voxid/tensor.hpp"

namespace voxid::model {

enum class LayerKind {
  kConv2d,
  kActivation,
  kMaxpool,
  kReshapeToSequence,
  kLstm,
  kFlatten,
  kBatchnorm,
  kDropout,
  kDense,
  kSoftmax,
};

std::string_view to_string(LayerKind kind);
std::string_view to_string(nn::Activation act);

struct LayerSpec {
  LayerKind kind = LayerKind::kConv2d;
  // conv2d
  std::size_t filters = 0;
  std::array<std::size_t, 2> kernel{3, 3};
  nn::Padding padding = nn::Padding::kValid;
  // activation
  nn::Activation activation = nn::Activation::kRelu;
  // lstm
  std::size_t units = 0;
  // dropout
  double rate = 0.0;
  // dense
  std::size_t neurons = 0;

  bool operator==(const LayerSpec&) const = default;

  static LayerSpec conv(std::size_t filters, nn::Padding padding = nn::Padding::kValid);
  static LayerSpec act(nn::Activation a);
  static LayerSpec pool();
  static LayerSpec to_sequence();
  static LayerSpec lstm(std::size_t units);
  static LayerSpec flatten();
  static LayerSpec batchnorm();
  static LayerSpec dropout(double rate);
  static LayerSpec dense(std::size_t neurons);
  static LayerSpec softmax();
};

struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::size_t num_classes = 0;
  features::FeatureKind input_kind = features::FeatureKind::kMelSpectrogram;

  bool operator==(const ModelSpec&) const = default;
};

inline constexpr int kSpecSchemaVersion = 1;

// Structural checks: classifier head, single reshape before the first LSTM,
// parameter completeness. Throws ConfigError.
void validate(const ModelSpec& spec);

std::vector<std::string> preset_names();
ModelSpec preset(std::string_view name, std::size_t num_classes,
                 features::FeatureKind input_kind = features::FeatureKind::kMelSpectrogram);

// Indices (into spec.layers) of every activation layer, in order.
std::vector<std::size_t> activation_slots(const ModelSpec& spec);

std::string serialize_spec(const ModelSpec& spec);
ModelSpec parse_spec(std::string_view json_text);

// Per-sample output shape after each layer.
struct ShapeTraceEntry {
  std::string layer;
  nn::Shape shape;
};

// Computes the shape trace without allocating weights. Throws BuildError
// naming the offending layer and its incoming shape.
std::vector<ShapeTraceEntry> trace_shapes(const ModelSpec& spec, std::size_t bands,
                                          std::size_t frames);

template <typename T>
struct Parameter {
  std::string name;
  nn::Tensor<T> value;  // gradient lives on the tensor node
  bool trainable = true;
};

template <typename T>
class Network {
 public:
  Network(ModelSpec spec, std::size_t bands, std::size_t frames, std::uint64_t seed);

  // input [B, bands, frames, 1] -> logits [B, num_classes]. The trailing
  // softmax layer is folded into the loss / probability computation.
  nn::Tensor<T> forward(nn::Tape<T>& tape, const nn::Tensor<T>& input, nn::Mode mode,
                        std::uint64_t dropout_seed);

  const ModelSpec& spec() const { return spec_; }
  std::size_t bands() const { return bands_; }
  std::size_t frames() const { return frames_; }
  const std::vector<ShapeTraceEntry>& shape_trace() const { return trace_; }

  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::size_t trainable_parameter_count() const;
  void zero_grad();

  std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>>& values);

  std::vector<nn::NamedArray> export_weights() const;
  // Names and shapes must match the built network exactly.
  void import_weights(const std::vector<nn::NamedArray>& arrays);

 private:
  struct Runtime {
    LayerKind kind;
    std::string name;
    std::vector<std::size_t> params;  // indices into params_
  };

  std::size_t add_param(std::string name, nn::Shape shape, bool trainable);

  ModelSpec spec_;
  std::size_t bands_;
  std::size_t frames_;
  std::vector<ShapeTraceEntry> trace_;
  std::vector<Parameter<T>> params_;
  std::vector<Runtime> layers_;
};

// Packs feature matrices into an [B, bands, frames, 1] tensor.
template <typename T>
nn::Tensor<T> make_batch(std::span<const features::FeatureMatrix* const> items);

}  // namespace voxid::model

#endif  // VOXID_MODEL_HPP_
