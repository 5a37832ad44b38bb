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

#include "voxid/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <utility>

#include "json.hpp"
#include "voxid/errors.hpp"
#include "voxid/evaluator.hpp"
#include "voxid/util.hpp"

namespace voxid::train {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a positive finite number");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

std::string serialize_train_config(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["seed"] = cfg.seed;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["epsilon"] = cfg.epsilon;
  return j.dump();
}

TrainConfig parse_train_config(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("train config: expected a JSON object");
  TrainConfig cfg;
  try {
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  return cfg;
}

template <typename T>
void adam_step(std::vector<model::Parameter<T>>& params, AdamState<T>& state,
               std::size_t step, const TrainConfig& cfg) {
  if (step == 0) throw InvalidArgumentError("adam step count is 1-based");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& param = params[p];
    if (!param.trainable || !param.value.has_grad()) continue;
    const auto g = std::as_const(param.value).grad();
    for (const T x : g) {
      if (!std::isfinite(static_cast<double>(x))) {
        throw NumericError("non-finite gradient in " + param.name);
      }
    }
    auto& m = state.m[p];
    auto& v = state.v[p];
    if (m.size() != g.size()) {
      m.assign(g.size(), T(0));
      v.assign(g.size(), T(0));
    }
    auto w = param.value.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon);
      w[i] = static_cast<T>(w[i] - update);
    }
  }
}

template void adam_step<float>(std::vector<model::Parameter<float>>&, AdamState<float>&,
                               std::size_t, const TrainConfig&);
template void adam_step<double>(std::vector<model::Parameter<double>>&, AdamState<double>&,
                                std::size_t, const TrainConfig&);

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience == 0) throw ConfigError("patience must be positive");
}

StopDecision EarlyStopping::update(std::size_t epoch, double val_loss) {
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    wait_ = 0;
    return StopDecision::kContinue;
  }
  ++wait_;
  return wait_ >= patience_ ? StopDecision::kStop : StopDecision::kContinue;
}

namespace {

void check_labels(const Dataset& data, std::size_t num_classes, const char* which) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] >= num_classes) {
      throw ConfigError(std::string(which) + " set: label " + std::to_string(data.labels[i]) +
                        " at item " + std::to_string(i) + " exceeds " +
                        std::to_string(num_classes) + " classes");
    }
  }
}

// Batch boundaries over a shuffled order. A trailing batch of one item is
// folded into its predecessor since batch statistics need two samples.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                              std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch) out.emplace_back(s, std::min(n, s + batch));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out.pop_back();
    out.back().second = n;
  }
  return out;
}

}  // namespace

TrainResult train(model::Network<float>& net, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (val_set.empty()) throw ConfigError("validation set is empty; early stopping needs it");
  const std::size_t k = net.spec().num_classes;
  check_labels(train_set, k, "training");
  check_labels(val_set, k, "validation");

  TrainResult result;
  EarlyStopping stopper(cfg.patience);
  AdamState<float> adam;
  std::size_t step = 0;
  std::vector<std::vector<float>> best_weights = net.snapshot();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, epoch));
    seeded_shuffle(order, rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (const auto& [begin, end] : batch_ranges(order.size(), cfg.batch_size)) {
      ++batch_index;
      std::vector<const features::FeatureMatrix*> items;
      std::vector<std::size_t> labels;
      for (std::size_t i = begin; i < end; ++i) {
        items.push_back(&train_set.features[order[i]]);
        labels.push_back(train_set.labels[order[i]]);
      }
      net.zero_grad();
      nn::Tape<float> tape;
      const std::uint64_t dropout_seed = derive_seed(derive_seed(cfg.seed, epoch), batch_index);
      const auto logits =
          net.forward(tape, model::make_batch<float>(items), nn::Mode::kTrain, dropout_seed);
      const auto ce = nn::softmax_cross_entropy(tape, logits, labels);
      const double loss = ce.loss.item();
      if (!std::isfinite(loss)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_index) + " (loss is not finite)");
      }
      tape.backward(ce.loss);
      adam_step(net.parameters(), adam, ++step, cfg);
      loss_sum += loss * static_cast<double>(end - begin);
      for (std::size_t b = 0; b < labels.size(); ++b) {
        const std::span<const float> row(ce.probabilities.data() + b * k, k);
        if (eval::argmax(row) == labels[b]) ++correct;
      }
    }

    const auto val = eval::predict(net, val_set, cfg.batch_size);
    std::size_t val_correct = 0;
    for (std::size_t i = 0; i < val_set.size(); ++i) {
      if (val.predicted[i] == val_set.labels[i]) ++val_correct;
    }
    if (!std::isfinite(val.mean_loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                         " (validation loss is not finite)");
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    rec.val_loss = val.mean_loss;
    rec.val_accuracy = static_cast<double>(val_correct) / static_cast<double>(val_set.size());
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const auto decision = stopper.update(epoch, rec.val_loss);
    if (stopper.best_epoch() == epoch) {
      best_weights = net.snapshot();
      result.best_val_accuracy = rec.val_accuracy;
    }
    if (decision == StopDecision::kStop) {
      result.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  net.restore(best_weights);
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_loss();
  return result;
}

Split split_dataset(std::span<const std::string> speakers, std::array<double, 3> fractions,
                    std::uint64_t seed) {
  for (const double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-6) {
    throw ConfigError("split fractions must sum to 1");
  }
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < speakers.size(); ++i) by_speaker[speakers[i]].push_back(i);

  Split split;
  std::uint64_t counter = 0;
  for (auto& [speaker, items] : by_speaker) {
    std::mt19937_64 rng(derive_seed(seed, fnv1a64(speaker) ^ counter++));
    seeded_shuffle(items, rng);
    const std::size_t n = items.size();
    auto take = [n](double f) -> std::size_t {
      if (f <= 0.0) return 0;
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(n * f + 1e-9)));
    };
    const std::size_t parts = (fractions[0] > 0.0) + (fractions[1] > 0.0) + (fractions[2] > 0.0);
    if (n < parts) {
      throw ConfigError("speaker '" + speaker + "' has " + std::to_string(n) +
                        " items, fewer than the " + std::to_string(parts) + " requested splits");
    }
    std::size_t n_val = take(fractions[1]);
    std::size_t n_test = take(fractions[2]);
    // Keep at least one training item whenever training is requested.
    while (fractions[0] > 0.0 && n_val + n_test >= n) {
      if (n_test >= n_val && n_test > 1) {
        --n_test;
      } else if (n_val > 1) {
        --n_val;
      } else {
        break;
      }
    }
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n_val && pos < n; ++i) split.val.push_back(items[pos++]);
    for (std::size_t i = 0; i < n_test && pos < n; ++i) split.test.push_back(items[pos++]);
    while (pos < n) split.train.push_back(items[pos++]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace voxid::train
