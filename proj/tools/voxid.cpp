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

// Command-line front end. Talks to the library only through voxid.h.
//
//   voxid [--seed N] [--config file.json] [--out DIR] [--threads N] <command> ...
//
// Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "voxid/voxid.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out = "voxid-out";
  int threads = 1;
};

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Fills options the user left unset from a JSON object keyed by long
// option name. Explicit flags always win.
void apply_config(CLI::App* app, const nlohmann::json& values) {
  for (CLI::Option* opt : app->get_options()) {
    if (opt->count() > 0 || opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config" || !values.contains(name)) continue;
    const auto& v = values.at(name);
    if (opt->get_type_size_max() == 0) {
      if (v.is_boolean() && v.get<bool>()) opt->add_result("true");
      else continue;
    } else if (v.is_array()) {
      for (const auto& item : v) opt->add_result(scalar_text(item));
    } else {
      opt->add_result(scalar_text(v));
    }
    opt->run_callback();
  }
}

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    auto j = nlohmann::json::parse(ss.str());
    if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

void check(vx_status status) {
  if (status != VX_OK) {
    throw std::runtime_error(std::string(vx_status_name(status)) + ": " + vx_last_error());
  }
}

void check_split(const std::vector<double>& split) {
  if (split.size() != 3) throw UsageError("--split takes three fractions, e.g. 0.8,0.1,0.1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxid: speaker identification with CNN-LSTM classifiers"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(vx_version()));

  Globals g;
  app.add_option("--seed", g.seed, "Master random seed")->capture_default_str();
  app.add_option("--config", g.config, "JSON file of option defaults (flags override)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for file-parallel stages")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // synth
  vx_synth_options synth;
  vx_synth_options_init(&synth);
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic speaker corpus");
  synth_cmd->add_option("--speakers", synth.speakers)->capture_default_str();
  synth_cmd->add_option("--utterances", synth.utterances, "Utterances per speaker")
      ->capture_default_str();
  synth_cmd->add_option("--duration", synth.duration_s, "Seconds per utterance")
      ->capture_default_str();
  synth_cmd->add_option("--accents", synth.accents, "Accent clusters")->capture_default_str();

  // extract
  std::string corpus;
  std::string feature_name = "mel";
  auto* extract_cmd = app.add_subcommand("extract", "Extract Mel or MFCC features from a corpus");
  extract_cmd->add_option("--corpus", corpus, "Corpus directory of <speaker>/<utt>.wav")
      ->required();
  extract_cmd->add_option("--features", feature_name)
      ->capture_default_str()
      ->check(CLI::IsMember({"mel", "mfcc"}));

  // train
  vx_train_options train;
  vx_train_options_init(&train);
  std::string train_data;
  std::string train_model;
  std::vector<double> train_split{train.split[0], train.split[1], train.split[2]};
  auto* train_cmd = app.add_subcommand("train", "Train a model on extracted features");
  train_cmd->add_option("--data", train_data, "Feature directory from extract")->required();
  train_cmd->add_option("--model", train_model, "Preset name or spec JSON path")->required();
  train_cmd->add_option("--lr", train.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch-size", train.batch_size)->capture_default_str();
  train_cmd->add_option("--epochs", train.max_epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--patience", train.patience, "Early-stopping patience")
      ->capture_default_str();
  train_cmd->add_option("--split", train_split, "Train,val,test fractions")->delimiter(',');

  // evaluate
  vx_evaluate_options evaluate;
  vx_evaluate_options_init(&evaluate);
  std::string eval_checkpoint;
  std::string eval_data;
  bool eval_all = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on held-out features");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint.json or checkpoint.vxw")
      ->required();
  eval_cmd->add_option("--data", eval_data, "Feature directory the model was trained on")
      ->required();
  eval_cmd->add_flag("--all", eval_all, "Score every indexed item, not only the test split");
  eval_cmd->add_option("--top-k", evaluate.top_k, "Classes in the reduced confusion matrix")
      ->capture_default_str();

  // tune
  vx_tune_options tune;
  vx_tune_options_init(&tune);
  std::string tune_data;
  std::string tune_model = "model-1";
  std::vector<double> tune_split{tune.split[0], tune.split[1], tune.split[2]};
  auto* tune_cmd = app.add_subcommand("tune", "Random search over learning rate, dropout, activations");
  tune_cmd->add_option("--data", tune_data)->required();
  tune_cmd->add_option("--model", tune_model, "Base preset or spec")->capture_default_str();
  tune_cmd->add_option("--trials", tune.trials)->capture_default_str();
  tune_cmd->add_option("--batch-size", tune.batch_size)->capture_default_str();
  tune_cmd->add_option("--epochs", tune.max_epochs)->capture_default_str();
  tune_cmd->add_option("--patience", tune.patience)->capture_default_str();
  tune_cmd->add_option("--split", tune_split)->delimiter(',');

  // bias
  std::string predictions;
  std::string metadata;
  auto* bias_cmd = app.add_subcommand("bias", "Per-gender and per-accent accuracy");
  bias_cmd->add_option("--predictions", predictions, "predictions.csv from evaluate")->required();
  bias_cmd->add_option("--metadata", metadata, "speaker_id,gender,accent CSV")->required();

  // report
  std::vector<std::string> metrics;
  std::vector<std::string> train_logs;
  std::string report_file;
  auto* report_cmd = app.add_subcommand("report", "Merge metrics files into a results table");
  report_cmd->add_option("--metrics", metrics, "metrics.json files, one row each")->required();
  report_cmd->add_option("--train-log", train_logs, "train-log.jsonl per metrics file");
  report_cmd->add_option("--output", report_file, "CSV path (default <out>/results.csv)");

  try {
    app.parse(argc, argv);
    if (!g.config.empty()) {
      const auto cfg = load_config(g.config);
      apply_config(&app, cfg);
      for (CLI::App* sub : app.get_subcommands()) {
        apply_config(sub, cfg);
        if (cfg.contains(sub->get_name()) && cfg.at(sub->get_name()).is_object()) {
          apply_config(sub, cfg.at(sub->get_name()));
        }
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "voxid: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    char* summary = nullptr;
    const std::string out = g.out;
    if (*synth_cmd) {
      synth.out_dir = out.c_str();
      synth.seed = g.seed;
      synth.threads = g.threads;
      check(vx_synth_corpus(&synth, &summary));
    } else if (*extract_cmd) {
      vx_extract_options ex;
      vx_extract_options_init(&ex);
      ex.corpus_dir = corpus.c_str();
      ex.out_dir = out.c_str();
      ex.kind = feature_name == "mfcc" ? VX_FEATURES_MFCC : VX_FEATURES_MEL;
      ex.threads = g.threads;
      check(vx_extract(&ex, &summary));
    } else if (*train_cmd) {
      check_split(train_split);
      train.data_dir = train_data.c_str();
      train.model = train_model.c_str();
      train.out_dir = out.c_str();
      for (int i = 0; i < 3; ++i) train.split[i] = train_split[i];
      train.seed = g.seed;
      check(vx_train(&train, &summary));
    } else if (*eval_cmd) {
      evaluate.checkpoint = eval_checkpoint.c_str();
      evaluate.data_dir = eval_data.c_str();
      evaluate.out_dir = out.c_str();
      evaluate.all_items = eval_all ? 1 : 0;
      check(vx_evaluate(&evaluate, &summary));
    } else if (*tune_cmd) {
      check_split(tune_split);
      tune.data_dir = tune_data.c_str();
      tune.model = tune_model.c_str();
      tune.out_dir = out.c_str();
      for (int i = 0; i < 3; ++i) tune.split[i] = tune_split[i];
      tune.seed = g.seed;
      check(vx_tune(&tune, &summary));
    } else if (*bias_cmd) {
      vx_bias_options b;
      vx_bias_options_init(&b);
      b.predictions = predictions.c_str();
      b.metadata = metadata.c_str();
      b.out_dir = out.c_str();
      check(vx_bias(&b, &summary));
    } else if (*report_cmd) {
      if (report_file.empty()) report_file = out + "/results.csv";
      std::vector<const char*> m;
      std::vector<const char*> l;
      for (const auto& s : metrics) m.push_back(s.c_str());
      for (const auto& s : train_logs) l.push_back(s.c_str());
      vx_report_options r;
      vx_report_options_init(&r);
      r.metrics = m.data();
      r.metrics_count = m.size();
      r.train_logs = l.empty() ? nullptr : l.data();
      r.train_logs_count = l.size();
      r.out_file = report_file.c_str();
      check(vx_report(&r));
    }
    vx_string_free(summary);
  } catch (const UsageError& e) {
    std::cerr << "voxid: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "voxid: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
