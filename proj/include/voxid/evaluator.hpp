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

// Closed-set classification metrics: confusion matrices and
// support-weighted precision / recall / F1.

#ifndef VOXID_EVALUATOR_HPP_
#define VOXID_EVALUATOR_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxid/dataset.hpp"
#include "voxid/model.hpp"

namespace voxid::eval {

struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;  // row = true class, column = predicted
  std::vector<std::string> labels;

  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * num_classes + pred];
  }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t col_sum(std::size_t c) const;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  double accuracy = 0.0;
  double loss = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::string averaging = "weighted";
};

// Labels default to "0".."K-1" when none are given. Throws IndexError with
// the offending position on out-of-range labels.
ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted, std::size_t num_classes,
                                 std::vector<std::string> labels = {});

// Loss is left at zero. Throws InvalidArgumentError on an empty matrix.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

// The k classes with the highest support (ties to the lower class index),
// in class-index order.
ConfusionMatrix topk_confusion(const ConfusionMatrix& cm, std::size_t k);

// Lowest index wins ties.
std::size_t argmax(std::span<const float> row);

struct Predictions {
  std::vector<std::size_t> predicted;
  std::vector<float> probabilities;  // [N, K]
  double mean_loss = 0.0;
};

// Inference-mode forward passes in fixed-size batches.
Predictions predict(model::Network<float>& net, const Dataset& data, std::size_t batch_size = 32);

struct Evaluation {
  MetricsReport metrics;
  ConfusionMatrix confusion;
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
};

Evaluation evaluate(model::Network<float>& net, const Dataset& data,
                    const std::vector<std::string>& class_labels, std::size_t batch_size = 32);

// Header row and column hold the class labels.
std::string confusion_csv(const ConfusionMatrix& cm);

}  // namespace voxid::eval

#endif  // VOXID_EVALUATOR_HPP_
