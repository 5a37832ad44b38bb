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

#include "voxid/tuner.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"
#include "voxid/errors.hpp"
#include "voxid/util.hpp"

namespace voxid::tune {

namespace {

using json = nlohmann::ordered_json;

constexpr int kMaxRedraws = 64;

std::size_t pick(std::size_t n, std::mt19937_64& rng) {
  return static_cast<std::size_t>(rng() % n);
}

nn::Activation parse_activation(const std::string& s) {
  if (s == "relu") return nn::Activation::kRelu;
  if (s == "tanh") return nn::Activation::kTanh;
  throw ParseError("unknown activation '" + s + "'");
}

}  // namespace

double SearchSpace::cardinality(std::size_t slots) const {
  return static_cast<double>(learning_rates.size()) * static_cast<double>(dropout_rates.size()) *
         std::pow(static_cast<double>(activations.size()), static_cast<double>(slots));
}

bool TrialSpec::same_point(const TrialSpec& o) const {
  return learning_rate == o.learning_rate && dropout_rate == o.dropout_rate &&
         activations == o.activations;
}

std::vector<TrialSpec> sample_trials(std::size_t n, const model::ModelSpec& base,
                                     const SearchSpace& space, std::uint64_t master_seed,
                                     std::vector<std::string>* warnings) {
  if (n == 0) throw InvalidArgumentError("trial count must be at least 1");
  if (space.learning_rates.empty() || space.dropout_rates.empty() || space.activations.empty()) {
    throw ConfigError("search space has an empty dimension");
  }
  for (const double d : space.dropout_rates) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("dropout rates must lie in [0, 1)");
  }
  const std::size_t slots = model::activation_slots(base).size();
  std::mt19937_64 rng(master_seed);
  std::vector<TrialSpec> trials;
  for (std::size_t t = 1; t <= n; ++t) {
    TrialSpec spec;
    bool duplicate = true;
    for (int attempt = 0; attempt < kMaxRedraws && duplicate; ++attempt) {
      spec.learning_rate = space.learning_rates[pick(space.learning_rates.size(), rng)];
      spec.dropout_rate = space.dropout_rates[pick(space.dropout_rates.size(), rng)];
      spec.activations.clear();
      for (std::size_t s = 0; s < slots; ++s) {
        spec.activations.push_back(space.activations[pick(space.activations.size(), rng)]);
      }
      duplicate = false;
      for (const auto& prev : trials) duplicate = duplicate || prev.same_point(spec);
    }
    if (duplicate && warnings) {
      warnings->push_back("trial " + std::to_string(t) +
                          " duplicates an earlier trial; search space exhausted");
    }
    spec.trial_id = t;
    spec.seed = derive_seed(master_seed, t);
    trials.push_back(std::move(spec));
  }
  return trials;
}

model::ModelSpec apply_trial(const model::ModelSpec& base, const TrialSpec& trial) {
  const auto slots = model::activation_slots(base);
  if (slots.size() != trial.activations.size()) {
    throw ConfigError("trial " + std::to_string(trial.trial_id) + " assigns " +
                      std::to_string(trial.activations.size()) + " activations but the spec has " +
                      std::to_string(slots.size()) + " slots");
  }
  model::ModelSpec out = base;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    out.layers[slots[s]].activation = trial.activations[s];
  }
  for (auto& l : out.layers) {
    if (l.kind == model::LayerKind::kDropout) l.rate = trial.dropout_rate;
  }
  return out;
}

std::string trial_result_json(const TrialResult& r) {
  json j;
  j["trial_id"] = r.trial.trial_id;
  j["learning_rate"] = r.trial.learning_rate;
  j["dropout_rate"] = r.trial.dropout_rate;
  json acts = json::array();
  for (const auto a : r.trial.activations) acts.push_back(std::string(model::to_string(a)));
  j["activations"] = acts;
  j["seed"] = r.trial.seed;
  j["best_val_accuracy"] = r.best_val_accuracy;
  j["best_val_loss"] = r.best_val_loss;
  j["epochs_run"] = r.epochs_run;
  j["diverged"] = r.diverged;
  return j.dump();
}

TrialResult parse_trial_result(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TrialResult r;
    r.trial.trial_id = j.at("trial_id").get<std::size_t>();
    r.trial.learning_rate = j.at("learning_rate").get<double>();
    r.trial.dropout_rate = j.at("dropout_rate").get<double>();
    for (const auto& a : j.at("activations")) {
      r.trial.activations.push_back(parse_activation(a.get<std::string>()));
    }
    r.trial.seed = j.at("seed").get<std::uint64_t>();
    r.best_val_accuracy = j.at("best_val_accuracy").get<double>();
    // Diverged trials serialize a non-finite loss as null.
    r.best_val_loss = j.at("best_val_loss").is_null()
                          ? std::numeric_limits<double>::infinity()
                          : j.at("best_val_loss").get<double>();
    r.epochs_run = j.at("epochs_run").get<std::size_t>();
    r.diverged = j.at("diverged").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("trial result: ") + e.what());
  }
}

bool ranks_before(const TrialResult& a, const TrialResult& b) {
  if (a.best_val_accuracy != b.best_val_accuracy) {
    return a.best_val_accuracy > b.best_val_accuracy;
  }
  if (a.best_val_loss != b.best_val_loss) return a.best_val_loss < b.best_val_loss;
  return a.trial.trial_id < b.trial.trial_id;
}

SearchOutcome run_search(const std::vector<TrialSpec>& trials, const model::ModelSpec& base,
                         const Dataset& train_set, const Dataset& val_set, std::size_t bands,
                         std::size_t frames, const train::TrainConfig& cfg_template,
                         const std::filesystem::path& results_path,
                         const TrialCallback& on_trial) {
  if (trials.empty()) throw InvalidArgumentError("no trials to run");
  SearchOutcome out;

  if (!results_path.empty() && std::filesystem::exists(results_path)) {
    std::istringstream in(read_file(results_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto r = parse_trial_result(line);
      const std::size_t i = out.results.size();
      if (i >= trials.size() || !(r.trial == trials[i])) {
        throw ConfigError("results file " + results_path.string() + " line " +
                          std::to_string(i + 1) + " does not match the sampled trial list");
      }
      out.results.push_back(std::move(r));
    }
    out.resumed = out.results.size();
  }

  std::ofstream log;
  if (!results_path.empty()) {
    log.open(results_path, std::ios::app | std::ios::binary);
    if (!log) throw IoError("cannot open " + results_path.string() + " for appending");
  }

  for (std::size_t i = out.results.size(); i < trials.size(); ++i) {
    const auto& trial = trials[i];
    TrialResult r;
    r.trial = trial;
    train::TrainConfig cfg = cfg_template;
    cfg.learning_rate = trial.learning_rate;
    cfg.seed = trial.seed;
    try {
      model::Network<float> net(apply_trial(base, trial), bands, frames, trial.seed);
      const auto tr = train::train(net, train_set, val_set, cfg);
      r.best_val_accuracy = tr.best_val_accuracy;
      r.best_val_loss = tr.best_val_loss;
      r.epochs_run = tr.history.size();
    } catch (const NumericError&) {
      r.diverged = true;
      r.best_val_accuracy = 0.0;
      r.best_val_loss = std::numeric_limits<double>::infinity();
    }
    if (log.is_open()) {
      log << trial_result_json(r) << "\n";
      log.flush();
    }
    if (on_trial) on_trial(r);
    out.results.push_back(std::move(r));
  }

  for (std::size_t i = 1; i < out.results.size(); ++i) {
    if (ranks_before(out.results[i], out.results[out.winner])) out.winner = i;
  }
  const auto& best = out.results[out.winner];
  out.best_spec = apply_trial(base, best.trial);
  out.best_spec.name = "tuned-trial-" + std::to_string(best.trial.trial_id);
  out.best_config = cfg_template;
  out.best_config.learning_rate = best.trial.learning_rate;
  out.best_config.seed = best.trial.seed;
  return out;
}

std::string best_trial_json(const SearchOutcome& outcome) {
  json j;
  j["trial"] = json::parse(trial_result_json(outcome.results.at(outcome.winner)));
  j["model_spec"] = json::parse(model::serialize_spec(outcome.best_spec));
  j["train_config"] = json::parse(train::serialize_train_config(outcome.best_config));
  return j.dump(2) + "\n";
}

}  // namespace voxid::tune
