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

// Mini-batch training with Adam and validation-loss early stopping.

#ifndef VOXID_TRAINER_HPP_
#define VOXID_TRAINER_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxid/dataset.hpp"
#include "voxid/model.hpp"

namespace voxid::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// JSON object form used by checkpoint sidecars and tuning outputs. Parsing
// starts from defaults, so absent keys keep their default values.
std::string serialize_train_config(const TrainConfig& cfg);
TrainConfig parse_train_config(std::string_view json_text);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double wall_seconds = 0.0;
};

// First and second moment estimates, one buffer per parameter.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// One Adam update over every trainable parameter using the gradients stored
// on the parameter tensors. `step` is the 1-based update count used for bias
// correction. Throws NumericError naming the parameter on a non-finite
// gradient.
template <typename T>
void adam_step(std::vector<model::Parameter<T>>& params, AdamState<T>& state,
               std::size_t step, const TrainConfig& cfg);

enum class StopDecision { kContinue, kStop };

// Tracks the minimum validation loss. Stops after `patience` consecutive
// epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);
  StopDecision update(std::size_t epoch, double val_loss);
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t wait_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double best_val_accuracy = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains in place and leaves the network holding the best-epoch weights
// (including batch-norm running statistics).
TrainResult train(model::Network<float>& net, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Stratified per speaker. Each speaker's items are shuffled with a seeded
// generator, then val and test take floor(n * fraction) items (at least one
// when the fraction is nonzero) and train takes the remainder. Index lists
// are returned sorted. Throws ConfigError naming any speaker with fewer
// items than there are nonzero fractions.
Split split_dataset(std::span<const std::string> speakers, std::array<double, 3> fractions,
                    std::uint64_t seed);

}  // namespace voxid::train

#endif  // VOXID_TRAINER_HPP_
