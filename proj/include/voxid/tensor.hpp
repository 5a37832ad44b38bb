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

// A small tape-based reverse-mode tensor engine covering the layer set of
// the CNN-LSTM speaker classifier: valid/same 2-D convolution, 2x2 max
// pooling, a full-sequence LSTM, batch normalization, inverted dropout,
// dense layers and softmax cross-entropy.
//
// Tensors are reference-counted handles onto nodes. Every op that touches a
// tensor requiring gradients appends a backward closure to the Tape it was
// given; Tape::backward replays those closures in reverse order. Layouts
// are row-major: images are [batch, height, width, channels] and sequences
// are [batch, time, features].
//
// The engine is instantiated for float (training) and double (gradient
// checks).

#ifndef VOXID_TENSOR_HPP_
#define VOXID_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace voxid::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

enum class Mode { kTrain, kInfer };
enum class Padding { kValid, kSame };
enum class Activation { kRelu, kTanh };

// Storage aligned to a cache line. Vectorized reductions peel leading
// elements up to the first aligned address, so a fixed alignment keeps
// results bit-identical from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlignment = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kAlignment}); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct Node {
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;  // empty until first accumulated into
  bool requires_grad = false;
  const void* producer = nullptr;  // tape that recorded this node, if any
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, const std::vector<T>& values, bool requires_grad = false);
  Tensor(Shape shape, Buffer<T> values, bool requires_grad = false);
  Tensor(Shape shape, std::initializer_list<T> values, bool requires_grad = false)
      : Tensor(std::move(shape), Buffer<T>(values), requires_grad) {}
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  T item() const;

  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view of the gradient, allocated on first use.
  std::span<T> grad();
  std::span<const T> grad() const;
  void zero_grad();

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Creates an output node owned by this tape.
  Tensor<T> make_output(Shape shape, Buffer<T> values, bool requires_grad);
  void record(const Tensor<T>& output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor that
  // requires gradients. Gradients accumulate; callers zero them between steps.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::shared_ptr<Node<T>> output;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
};

// --- layer ops ------------------------------------------------------------

// input [B,H,W,Cin], kernel [kh,kw,Cin,Cout], bias [Cout].
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, Padding padding = Padding::kValid);

// Non-overlapping 2x2 max pooling; odd trailing rows/columns are dropped.
template <typename T>
Tensor<T> maxpool2d(Tape<T>& tape, const Tensor<T>& input);

// input [B,F], weight [F,O], bias [O].
template <typename T>
Tensor<T> dense(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight,
                const Tensor<T>& bias);

template <typename T>
Tensor<T> activation(Tape<T>& tape, const Tensor<T>& input, Activation act);

// Gate order within the 4*units axis is input, forget, cell, output.
template <typename T>
struct LstmParams {
  Tensor<T> kernel;     // [F, 4U]
  Tensor<T> recurrent;  // [U, 4U]
  Tensor<T> bias;       // [4U]
};

// input [B,T,F] -> hidden states for every step [B,T,U]; zero initial state.
template <typename T>
Tensor<T> lstm_sequence(Tape<T>& tape, const Tensor<T>& input,
                        const LstmParams<T>& params);

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

// Normalizes over every axis but the last. Train mode uses batch moments and
// updates the running statistics; infer mode uses the running statistics.
template <typename T>
Tensor<T> batchnorm(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& gamma,
                    const Tensor<T>& beta, BatchNormState<T>& state, Mode mode);

// Inverted dropout. Identity in infer mode or when rate == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& input, double rate, Mode mode,
                  std::uint64_t seed);

// Element order is preserved; only the shape changes.
template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& input, Shape shape);

// [B,H,W,C] -> [B,W,H*C]: the width axis becomes the time axis.
template <typename T>
Tensor<T> feature_map_to_sequence(Tape<T>& tape, const Tensor<T>& input);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& input);

// sum(input * weights) with constant weights of the same size.
template <typename T>
Tensor<T> inner(Tape<T>& tape, const Tensor<T>& input, std::span<const T> weights);

template <typename T>
struct CrossEntropyResult {
  Tensor<T> loss;                // scalar
  std::vector<T> probabilities;  // [B*K], row-major
};

template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                            std::span<const std::size_t> labels);

// Row-wise softmax of [B,K] logits without recording.
template <typename T>
std::vector<T> softmax(const Tensor<T>& logits);

}  // namespace voxid::nn

#endif  // VOXID_TENSOR_HPP_
