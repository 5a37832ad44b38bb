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

#include "voxid/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxid/errors.hpp"

namespace voxid::eval {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t c = 0; c < num_classes; ++c) t += at(c, c);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < num_classes; ++p) s += at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < num_classes; ++t) s += at(t, c);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted, std::size_t num_classes,
                                 std::vector<std::string> labels) {
  if (truth.size() != predicted.size()) {
    throw InvalidArgumentError("confusion matrix: " + std::to_string(truth.size()) +
                               " true labels but " + std::to_string(predicted.size()) +
                               " predictions");
  }
  if (labels.empty()) {
    for (std::size_t c = 0; c < num_classes; ++c) labels.push_back(std::to_string(c));
  }
  if (labels.size() != num_classes) {
    throw InvalidArgumentError("confusion matrix: label count does not match class count");
  }
  ConfusionMatrix cm{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0),
                     std::move(labels)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw IndexError("confusion matrix: label out of range [0, " +
                       std::to_string(num_classes) + ") at position " + std::to_string(i));
    }
    ++cm.counts[truth[i] * num_classes + predicted[i]];
  }
  return cm;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw InvalidArgumentError("metrics: confusion matrix is empty");
  MetricsReport r;
  const double n = static_cast<double>(total);
  for (std::size_t c = 0; c < cm.num_classes; ++c) {
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto support = static_cast<double>(cm.row_sum(c));
    const auto predicted = static_cast<double>(cm.col_sum(c));
    if (support == 0.0) continue;
    const double precision = predicted > 0.0 ? tp / predicted : 0.0;
    const double recall = tp / support;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    r.precision += support * precision;
    r.recall += tp;  // support * (tp / support), kept exact
    r.f1 += support * f1;
  }
  r.precision /= n;
  r.recall /= n;
  r.f1 /= n;
  r.accuracy = static_cast<double>(cm.trace()) / n;
  return r;
}

ConfusionMatrix topk_confusion(const ConfusionMatrix& cm, std::size_t k) {
  if (k > cm.num_classes) {
    throw InvalidArgumentError("top-k: k=" + std::to_string(k) + " exceeds " +
                               std::to_string(cm.num_classes) + " classes");
  }
  std::vector<std::size_t> order(cm.num_classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cm.row_sum(a) > cm.row_sum(b);
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  ConfusionMatrix out{k, std::vector<std::uint64_t>(k * k, 0), {}};
  for (std::size_t i = 0; i < k; ++i) {
    out.labels.push_back(cm.labels[order[i]]);
    for (std::size_t j = 0; j < k; ++j) out.counts[i * k + j] = cm.at(order[i], order[j]);
  }
  return out;
}

std::size_t argmax(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

Predictions predict(model::Network<float>& net, const Dataset& data, std::size_t batch_size) {
  if (batch_size == 0) throw InvalidArgumentError("batch size must be positive");
  const std::size_t k = net.spec().num_classes;
  Predictions out;
  out.probabilities.reserve(data.size() * k);
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<const features::FeatureMatrix*> items;
    for (std::size_t i = start; i < end; ++i) {
      const auto& m = data.features[i];
      if (m.bands() != net.bands() || m.frames() != net.frames()) {
        throw ShapeError("feature shape " + std::to_string(m.bands()) + "x" +
                         std::to_string(m.frames()) + " does not match model input " +
                         std::to_string(net.bands()) + "x" + std::to_string(net.frames()));
      }
      items.push_back(&m);
    }
    nn::Tape<float> tape;
    const auto logits = net.forward(tape, model::make_batch<float>(items), nn::Mode::kInfer, 0);
    const std::span<const std::size_t> labels(data.labels.data() + start, end - start);
    const auto ce = nn::softmax_cross_entropy(tape, logits, labels);
    loss_sum += static_cast<double>(ce.loss.item()) * static_cast<double>(end - start);
    for (std::size_t b = 0; b < end - start; ++b) {
      const std::span<const float> row(ce.probabilities.data() + b * k, k);
      out.predicted.push_back(argmax(row));
    }
    out.probabilities.insert(out.probabilities.end(), ce.probabilities.begin(),
                             ce.probabilities.end());
  }
  out.mean_loss = data.empty() ? 0.0 : loss_sum / static_cast<double>(data.size());
  return out;
}

Evaluation evaluate(model::Network<float>& net, const Dataset& data,
                    const std::vector<std::string>& class_labels, std::size_t batch_size) {
  const auto preds = predict(net, data, batch_size);
  Evaluation e;
  e.truth = data.labels;
  e.predicted = preds.predicted;
  e.confusion = confusion_matrix(e.truth, e.predicted, net.spec().num_classes, class_labels);
  e.metrics = metrics_from_confusion(e.confusion);
  e.metrics.loss = preds.mean_loss;
  return e;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\predicted";
  for (const auto& l : cm.labels) out += "," + l;
  out += "\n";
  for (std::size_t t = 0; t < cm.num_classes; ++t) {
    out += cm.labels[t];
    for (std::size_t p = 0; p < cm.num_classes; ++p) out += "," + std::to_string(cm.at(t, p));
    out += "\n";
  }
  return out;
}

}  // namespace voxid::eval
