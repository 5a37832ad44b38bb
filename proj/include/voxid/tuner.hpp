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

// Uniform random search over learning rate, dropout rate and per-slot
// activation, with a resumable JSON-lines results file.

#ifndef VOXID_TUNER_HPP_
#define VOXID_TUNER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "voxid/dataset.hpp"
#include "voxid/model.hpp"
#include "voxid/trainer.hpp"

namespace voxid::tune {

struct SearchSpace {
  std::vector<double> learning_rates{1e-2, 1e-3, 1e-4};
  std::vector<double> dropout_rates{0.2, 0.3, 0.4, 0.5};
  std::vector<nn::Activation> activations{nn::Activation::kRelu, nn::Activation::kTanh};

  // Number of distinct trials for a spec with `slots` activation layers.
  double cardinality(std::size_t slots) const;
};

struct TrialSpec {
  std::size_t trial_id = 0;  // 1-based
  double learning_rate = 0.0;
  double dropout_rate = 0.0;
  std::vector<nn::Activation> activations;  // one per activation slot
  std::uint64_t seed = 0;

  bool operator==(const TrialSpec&) const = default;
  // Compares everything except id and seed.
  bool same_point(const TrialSpec& other) const;
};

// Duplicate points are re-drawn up to a bound, then kept; each kept
// duplicate appends a message to `warnings` when given.
std::vector<TrialSpec> sample_trials(std::size_t n, const model::ModelSpec& base,
                                     const SearchSpace& space, std::uint64_t master_seed,
                                     std::vector<std::string>* warnings = nullptr);

// Base spec with every dropout layer set to the trial rate and each
// activation slot replaced.
model::ModelSpec apply_trial(const model::ModelSpec& base, const TrialSpec& trial);

struct TrialResult {
  TrialSpec trial;
  double best_val_accuracy = 0.0;
  double best_val_loss = 0.0;
  std::size_t epochs_run = 0;
  bool diverged = false;
};

std::string trial_result_json(const TrialResult& r);
TrialResult parse_trial_result(std::string_view line);

struct SearchOutcome {
  std::vector<TrialResult> results;  // in trial order
  std::size_t winner = 0;            // index into results
  std::size_t resumed = 0;           // trials read back from the results file
  model::ModelSpec best_spec;
  train::TrainConfig best_config;
};

// Best validation accuracy first, then lower validation loss, then lower
// trial id.
bool ranks_before(const TrialResult& a, const TrialResult& b);

using TrialCallback = std::function<void(const TrialResult&)>;

// Trains each trial on its own seed. When `results_path` is non-empty,
// completed trials already in that file are reused and new ones appended.
// A diverged trial scores accuracy 0 and the search continues.
SearchOutcome run_search(const std::vector<TrialSpec>& trials, const model::ModelSpec& base,
                         const Dataset& train_set, const Dataset& val_set, std::size_t bands,
                         std::size_t frames, const train::TrainConfig& cfg_template,
                         const std::filesystem::path& results_path = {},
                         const TrialCallback& on_trial = {});

// Winning spec plus the config that trained it.
std::string best_trial_json(const SearchOutcome& outcome);

}  // namespace voxid::tune

#endif  // VOXID_TUNER_HPP_
