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

// File-level pipeline stages. Each stage reads its inputs from disk, writes
// its artifacts into an output directory and finishes with an atomically
// written <stage>-manifest.json listing config, input fingerprints and
// outputs.

#ifndef VOXID_PIPELINE_HPP_
#define VOXID_PIPELINE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "voxid/features.hpp"
#include "voxid/model.hpp"
#include "voxid/trainer.hpp"

namespace voxid::pipeline {

namespace fs = std::filesystem;

using Logger = std::function<void(const std::string&)>;

// Writes "voxid: <message>" to stderr.
Logger stderr_logger();

struct StageResult {
  std::vector<fs::path> outputs;
  fs::path manifest;
  std::string summary;  // stage-specific JSON
};

struct SynthOptions {
  fs::path out_dir;  // corpus lands in <out_dir>/corpus
  std::size_t speakers = 10;
  std::size_t utterances = 40;
  double duration_s = 3.0;
  std::size_t accents = 4;
  std::uint64_t seed = 0;
  int threads = 1;
  Logger log;
};
StageResult run_synth(const SynthOptions& opts);

struct ExtractOptions {
  fs::path corpus_dir;
  fs::path out_dir;  // receives <speaker>/<chunk>.vxf, index.csv, metadata.csv
  features::FeatureKind kind = features::FeatureKind::kMelSpectrogram;
  int threads = 1;
  Logger log;
};
StageResult run_extract(const ExtractOptions& opts);

struct TrainOptions {
  fs::path data_dir;  // an extract output directory
  std::string model = "model-1";  // preset name or path to a spec JSON
  fs::path out_dir;
  train::TrainConfig config;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  Logger log;
};
StageResult run_train(const TrainOptions& opts);

struct EvaluateOptions {
  fs::path checkpoint;  // checkpoint.json sidecar or its checkpoint.vxw
  fs::path data_dir;
  fs::path out_dir;
  bool all_items = false;  // default: the held-out test split
  std::size_t top_k = 20;
  std::size_t batch_size = 32;
  Logger log;
};
StageResult run_evaluate(const EvaluateOptions& opts);

struct BiasOptions {
  fs::path predictions;  // predictions.csv from evaluate
  fs::path metadata;     // speaker_id,gender,accent
  fs::path out_dir;
  Logger log;
};
StageResult run_bias(const BiasOptions& opts);

struct TuneOptions {
  fs::path data_dir;
  std::string model = "model-1";
  fs::path out_dir;
  std::size_t trials = 15;
  train::TrainConfig config;  // learning rate and seed are set per trial
  std::array<double, 3> split{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  Logger log;
};
StageResult run_tune(const TuneOptions& opts);

struct ReportOptions {
  std::vector<fs::path> metrics;     // metrics.json files, one row each
  std::vector<fs::path> train_logs;  // optional, matched by position
  fs::path out_file;
  Logger log;
};
StageResult run_report(const ReportOptions& opts);

// A trained network with everything needed to featurize and label inputs.
struct LoadedCheckpoint {
  std::unique_ptr<model::Network<float>> net;
  std::vector<std::string> class_labels;
  features::BandStats stats;
  std::string feature_fingerprint;  // of the raw (unnormalized) features
  train::TrainConfig config;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<std::string> test_files;  // relative to the data directory
};

// Accepts the sidecar JSON or the .vxw next to it.
LoadedCheckpoint load_checkpoint(const fs::path& path);

// Table-of-results header used by run_report.
inline constexpr const char* kReportHeader =
    "Model,Best Val Accuracy,Test Accuracy,Test Loss,Precision,Recall,F1-Score,"
    "Epoch Converged,Time Taken (minutes)";

}  // namespace voxid::pipeline

#endif  // VOXID_PIPELINE_HPP_
