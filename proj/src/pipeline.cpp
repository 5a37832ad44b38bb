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

#include "voxid/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "voxid/audio.hpp"
#include "voxid/bias.hpp"
#include "voxid/checkpoint.hpp"
#include "voxid/dataset.hpp"
#include "voxid/errors.hpp"
#include "voxid/evaluator.hpp"
#include "voxid/synth.hpp"
#include "voxid/tuner.hpp"
#include "voxid/util.hpp"

namespace voxid::pipeline {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kSidecarSchema = "voxid.checkpoint";

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string file_fingerprint(const fs::path& p) {
  return "fnv1a64:" + hex64(fnv1a64(read_file(p)));
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw InvalidArgumentError("output directory is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string format_real(double v, const char* fmt = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

// Names a file relative to a stage directory so manifests do not depend on
// where a run happened.
std::string relative_name(const fs::path& p, const fs::path& dir) {
  const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(
      fs::absolute(dir).lexically_normal());
  return rel.empty() ? p.generic_string() : rel.generic_string();
}

// Collects what a stage consumed and produced, then writes the manifest.
class Manifest {
 public:
  Manifest(std::string stage, json config)
      : stage_(std::move(stage)), config_(std::move(config)), started_(utc_timestamp()) {}

  void input(const std::string& name, const std::string& fingerprint) {
    inputs_[name] = fingerprint;
  }
  void output(const fs::path& p) { outputs_.push_back(p); }
  const std::vector<fs::path>& outputs() const { return outputs_; }

  fs::path write(const fs::path& dir) const {
    const std::string identity = stage_ + "\n" + config_.dump() + "\n" + inputs_.dump();
    json j;
    j["run_id"] = stage_ + "-" + hex64(fnv1a64(identity));
    j["stage"] = stage_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    json outs = json::array();
    for (const auto& p : outputs_) outs.push_back(relative_name(p, dir));
    j["outputs"] = outs;
    j["started_at"] = started_;
    j["finished_at"] = utc_timestamp();
    const fs::path path = dir / (stage_ + "-manifest.json");
    write_file_atomic(path, j.dump(2) + "\n");
    return path;
  }

 private:
  std::string stage_;
  json config_;
  json inputs_ = json::object();
  std::vector<fs::path> outputs_;
  std::string started_;
};

StageResult finish(const Manifest& m, const fs::path& dir, std::string summary = "{}") {
  StageResult r;
  r.outputs = m.outputs();
  r.manifest = m.write(dir);
  r.summary = std::move(summary);
  return r;
}

// --- feature directories --------------------------------------------------

struct FeatureSet {
  std::vector<features::IndexEntry> entries;
  std::vector<features::FeatureMatrix> matrices;
  std::string fingerprint;  // shared raw-feature config fingerprint
  std::string index_fingerprint;
};

FeatureSet load_feature_dir(const fs::path& dir) {
  const fs::path index = dir / "index.csv";
  if (!fs::exists(index)) throw IoError("no index.csv in " + dir.string());
  FeatureSet fsx;
  const std::string text = read_file(index);
  fsx.index_fingerprint = "fnv1a64:" + hex64(fnv1a64(text));
  fsx.entries = features::parse_index_csv(text);
  if (fsx.entries.empty()) throw ConfigError(index.string() + " lists no feature files");
  fsx.matrices.reserve(fsx.entries.size());
  for (const auto& e : fsx.entries) fsx.matrices.push_back(features::read_vxf(dir / e.file));
  fsx.fingerprint = fsx.matrices.front().config_fingerprint;
  for (std::size_t i = 0; i < fsx.matrices.size(); ++i) {
    const auto& m = fsx.matrices[i];
    if (m.config_fingerprint != fsx.fingerprint) {
      throw ConfigError(fsx.entries[i].file + " was extracted with a different configuration");
    }
    if (m.bands() != fsx.matrices.front().bands() ||
        m.frames() != fsx.matrices.front().frames()) {
      throw ShapeError(fsx.entries[i].file + " has shape " + std::to_string(m.bands()) + "x" +
                       std::to_string(m.frames()) + ", expected " +
                       std::to_string(fsx.matrices.front().bands()) + "x" +
                       std::to_string(fsx.matrices.front().frames()));
    }
  }
  return fsx;
}

std::vector<std::string> class_labels_of(const FeatureSet& fsx) {
  std::set<std::string> s;
  for (const auto& e : fsx.entries) s.insert(e.speaker_id);
  if (s.size() < 2) throw ConfigError("need at least 2 speakers, found " + std::to_string(s.size()));
  return {s.begin(), s.end()};
}

std::size_t label_index(const std::vector<std::string>& labels, const std::string& speaker) {
  const auto it = std::lower_bound(labels.begin(), labels.end(), speaker);
  if (it == labels.end() || *it != speaker) {
    throw ConfigError("speaker '" + speaker + "' is not one of the model's classes");
  }
  return static_cast<std::size_t>(it - labels.begin());
}

Dataset make_dataset(const FeatureSet& fsx, const std::vector<std::size_t>& items,
                     const std::vector<std::string>& labels, const features::BandStats& stats) {
  Dataset d;
  for (const std::size_t i : items) {
    d.add(features::normalize_features(fsx.matrices[i], stats),
          label_index(labels, fsx.entries[i].speaker_id));
  }
  return d;
}

struct Prepared {
  FeatureSet fsx;
  std::vector<std::string> labels;
  train::Split split;
  features::BandStats stats;
  Dataset train_set;
  Dataset val_set;
  model::ModelSpec spec;
};

model::ModelSpec resolve_model(const std::string& model, std::size_t num_classes,
                               features::FeatureKind kind) {
  const auto presets = model::preset_names();
  if (std::find(presets.begin(), presets.end(), model) != presets.end()) {
    return model::preset(model, num_classes, kind);
  }
  if (!fs::exists(model)) {
    std::string names;
    for (const auto& p : presets) names += (names.empty() ? "" : ", ") + p;
    throw ConfigError("model '" + model + "' is neither a preset (" + names +
                      ") nor a spec file");
  }
  auto spec = model::parse_spec(read_file(model));
  if (spec.num_classes != num_classes) {
    throw ConfigError("spec " + model + " declares " + std::to_string(spec.num_classes) +
                      " classes but the data has " + std::to_string(num_classes));
  }
  if (spec.input_kind != kind) {
    throw ConfigError("spec " + model + " expects " +
                      std::string(features::to_string(spec.input_kind)) +
                      " features but the data holds " + std::string(features::to_string(kind)));
  }
  return spec;
}

Prepared prepare(const fs::path& data_dir, const std::string& model,
                 const std::array<double, 3>& fractions, std::uint64_t seed) {
  Prepared p;
  p.fsx = load_feature_dir(data_dir);
  p.labels = class_labels_of(p.fsx);
  std::vector<std::string> speakers;
  for (const auto& e : p.fsx.entries) speakers.push_back(e.speaker_id);
  p.split = train::split_dataset(speakers, fractions, seed);
  if (p.split.train.empty() || p.split.val.empty()) {
    throw ConfigError("split leaves no training or validation items");
  }
  std::vector<features::FeatureMatrix> train_raw;
  for (const auto i : p.split.train) train_raw.push_back(p.fsx.matrices[i]);
  p.stats = features::compute_band_stats(train_raw);
  p.train_set = make_dataset(p.fsx, p.split.train, p.labels, p.stats);
  p.val_set = make_dataset(p.fsx, p.split.val, p.labels, p.stats);
  p.spec = resolve_model(model, p.labels.size(), p.fsx.matrices.front().kind);
  return p;
}

json split_config_json(const std::array<double, 3>& s) {
  return json::array({s[0], s[1], s[2]});
}

json file_list(const FeatureSet& fsx, const std::vector<std::size_t>& items) {
  json a = json::array();
  for (const auto i : items) a.push_back(fsx.entries[i].file);
  return a;
}

std::string epoch_json(const train::EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["train_accuracy"] = r.train_accuracy;
  j["val_loss"] = r.val_loss;
  j["val_accuracy"] = r.val_accuracy;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

std::vector<fs::path> list_wavs(const fs::path& corpus) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(corpus)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") {
      out.push_back(fs::relative(e.path(), corpus));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Logger stderr_logger() {
  return [](const std::string& msg) { std::cerr << "voxid: " << msg << "\n"; };
}

// --- synth ----------------------------------------------------------------

StageResult run_synth(const SynthOptions& opts) {
  ensure_dir(opts.out_dir);
  json cfg;
  cfg["speakers"] = opts.speakers;
  cfg["utterances"] = opts.utterances;
  cfg["duration_s"] = opts.duration_s;
  cfg["accents"] = opts.accents;
  cfg["seed"] = opts.seed;
  Manifest m("synth", cfg);
  const auto profiles = synth::generate_profiles(opts.speakers, opts.accents, opts.seed);
  say(opts.log, "synthesizing " + std::to_string(opts.speakers * opts.utterances) +
                    " utterances for " + std::to_string(opts.speakers) + " speakers");
  const fs::path corpus = opts.out_dir / "corpus";
  const auto layout = synth::generate_corpus(profiles, opts.utterances, opts.duration_s, corpus,
                                             opts.seed, opts.threads);
  for (const auto& f : layout.wav_files) m.output(corpus / f);
  m.output(layout.metadata);
  json summary;
  summary["corpus"] = corpus.generic_string();
  summary["files"] = layout.wav_files.size();
  return finish(m, opts.out_dir, summary.dump());
}

// --- extract --------------------------------------------------------------

StageResult run_extract(const ExtractOptions& opts) {
  if (!fs::is_directory(opts.corpus_dir)) {
    throw IoError("corpus directory " + opts.corpus_dir.string() + " does not exist");
  }
  ensure_dir(opts.out_dir);
  features::ExtractionConfig fcfg;
  fcfg.kind = opts.kind;
  json cfg;
  cfg["features"] = std::string(features::to_string(opts.kind));
  cfg["extraction"] = fcfg.canonical();
  Manifest m("extract", cfg);

  const auto wavs = list_wavs(opts.corpus_dir);
  if (wavs.empty()) throw ConfigError("no .wav files under " + opts.corpus_dir.string());
  say(opts.log, "extracting " + std::string(features::to_string(opts.kind)) + " features from " +
                    std::to_string(wavs.size()) + " files");

  // Each file yields zero or more chunks; collect per file, then flatten in
  // sorted order so the index does not depend on thread scheduling.
  std::vector<std::vector<features::IndexEntry>> per_file(wavs.size());
  std::vector<std::string> fingerprints(wavs.size());
  parallel_for(wavs.size(), opts.threads, [&](std::size_t i) {
    const fs::path src = opts.corpus_dir / wavs[i];
    const std::string bytes = read_file(src);
    fingerprints[i] = hex64(fnv1a64(bytes));
    auto clip = audio::decode_wav(bytes);
    // Speaker comes from the directory name; the file stem names the utterance.
    clip.speaker_id = wavs[i].has_parent_path() ? wavs[i].parent_path().filename().string()
                                                : wavs[i].stem().string();
    clip.utterance_id = wavs[i].stem().string();
    if (clip.sample_rate_hz != fcfg.sample_rate_hz) {
      clip = audio::resample(clip, fcfg.sample_rate_hz);
    }
    for (const auto& chunk : audio::chunk_fixed(clip, fcfg.chunk_seconds)) {
      const auto filtered = audio::preemphasis(chunk, fcfg.preemphasis);
      const auto fm = features::extract(filtered, fcfg);
      const fs::path rel = fs::path(clip.speaker_id) / (chunk.utterance_id + ".vxf");
      std::error_code ec;
      fs::create_directories(opts.out_dir / rel.parent_path(), ec);
      features::write_vxf(opts.out_dir / rel, fm);
      per_file[i].push_back({rel.generic_string(), clip.speaker_id});
    }
  });

  std::vector<features::IndexEntry> entries;
  std::string corpus_hash;
  for (std::size_t i = 0; i < wavs.size(); ++i) {
    corpus_hash += wavs[i].generic_string() + "=" + fingerprints[i] + "\n";
    for (auto& e : per_file[i]) {
      m.output(opts.out_dir / e.file);
      entries.push_back(std::move(e));
    }
  }
  m.input("corpus", "fnv1a64:" + hex64(fnv1a64(corpus_hash)));
  if (entries.empty()) throw ConfigError("no clip was long enough for a single chunk");

  const fs::path index = opts.out_dir / "index.csv";
  write_file_atomic(index, features::format_index_csv(entries));
  m.output(index);
  const fs::path meta_src = opts.corpus_dir / "metadata.csv";
  if (fs::exists(meta_src)) {
    const fs::path meta_dst = opts.out_dir / "metadata.csv";
    write_file_atomic(meta_dst, read_file(meta_src));
    m.input("metadata", file_fingerprint(meta_src));
    m.output(meta_dst);
  }
  say(opts.log, "wrote " + std::to_string(entries.size()) + " feature files");
  json summary;
  summary["files"] = entries.size();
  summary["features"] = std::string(features::to_string(opts.kind));
  return finish(m, opts.out_dir, summary.dump());
}

// --- train ----------------------------------------------------------------

StageResult run_train(const TrainOptions& opts) {
  ensure_dir(opts.out_dir);
  train::TrainConfig tcfg = opts.config;
  tcfg.seed = opts.seed;
  tcfg.validate();
  json cfg;
  cfg["model"] = opts.model;
  cfg["train"] = json::parse(train::serialize_train_config(tcfg));
  cfg["split"] = split_config_json(opts.split);
  cfg["seed"] = opts.seed;
  Manifest m("train", cfg);

  auto p = prepare(opts.data_dir, opts.model, opts.split, opts.seed);
  m.input("index", p.fsx.index_fingerprint);
  const std::size_t bands = p.fsx.matrices.front().bands();
  const std::size_t frames = p.fsx.matrices.front().frames();
  say(opts.log, "training " + p.spec.name + " on " + std::to_string(p.train_set.size()) +
                    " items (" + std::to_string(p.val_set.size()) + " validation, " +
                    std::to_string(p.labels.size()) + " classes, input " +
                    std::to_string(bands) + "x" + std::to_string(frames) + ")");

  model::Network<float> net(p.spec, bands, frames, derive_seed(opts.seed, 1));
  const fs::path log_path = opts.out_dir / "train-log.jsonl";
  std::string log_text;
  const auto result = train::train(net, p.train_set, p.val_set, tcfg,
                                   [&](const train::EpochRecord& r) {
                                     log_text += epoch_json(r) + "\n";
                                     write_file_atomic(log_path, log_text);
                                     say(opts.log, "epoch " + std::to_string(r.epoch) +
                                                       " train_loss " + format_real(r.train_loss) +
                                                       " val_loss " + format_real(r.val_loss) +
                                                       " val_acc " + format_real(r.val_accuracy));
                                   });
  m.output(log_path);

  const fs::path weights = opts.out_dir / "checkpoint.vxw";
  nn::write_vxw(weights, net.export_weights());
  m.output(weights);

  json side;
  side["schema"] = kSidecarSchema;
  side["version"] = 1;
  side["weights"] = "checkpoint.vxw";
  side["weights_fingerprint"] = file_fingerprint(weights);
  side["model_spec"] = json::parse(model::serialize_spec(p.spec));
  side["train_config"] = json::parse(train::serialize_train_config(tcfg));
  side["input"] = {{"bands", bands}, {"frames", frames}};
  side["class_labels"] = p.labels;
  side["feature_fingerprint"] = p.fsx.fingerprint;
  side["normalization"] = {{"mean", p.stats.mean}, {"stddev", p.stats.stddev}};
  side["training"] = {{"best_epoch", result.best_epoch},
                      {"best_val_loss", result.best_val_loss},
                      {"best_val_accuracy", result.best_val_accuracy},
                      {"epochs_run", result.history.size()},
                      {"stopped_early", result.stopped_early}};
  side["split"] = {{"fractions", split_config_json(opts.split)},
                   {"seed", opts.seed},
                   {"train", file_list(p.fsx, p.split.train)},
                   {"val", file_list(p.fsx, p.split.val)},
                   {"test", file_list(p.fsx, p.split.test)}};
  const fs::path sidecar = opts.out_dir / "checkpoint.json";
  write_file_atomic(sidecar, side.dump(2) + "\n");
  m.output(sidecar);
  say(opts.log, "best epoch " + std::to_string(result.best_epoch) + " val_acc " +
                    format_real(result.best_val_accuracy));
  return finish(m, opts.out_dir, side["training"].dump());
}

// --- checkpoints ----------------------------------------------------------

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  fs::path sidecar = path;
  if (path.extension() == ".vxw") sidecar = fs::path(path).replace_extension(".json");
  if (!fs::exists(sidecar)) throw IoError("checkpoint sidecar " + sidecar.string() + " not found");
  json side;
  try {
    side = json::parse(read_file(sidecar));
  } catch (const json::exception& e) {
    throw ParseError(sidecar.string() + ": " + e.what());
  }
  LoadedCheckpoint c;
  try {
    if (side.at("schema").get<std::string>() != kSidecarSchema) {
      throw ParseError(sidecar.string() + ": not a checkpoint sidecar");
    }
    const auto spec = model::parse_spec(side.at("model_spec").dump());
    const auto bands = side.at("input").at("bands").get<std::size_t>();
    const auto frames = side.at("input").at("frames").get<std::size_t>();
    c.net = std::make_unique<model::Network<float>>(spec, bands, frames, 0);
    c.class_labels = side.at("class_labels").get<std::vector<std::string>>();
    c.stats.mean = side.at("normalization").at("mean").get<std::vector<double>>();
    c.stats.stddev = side.at("normalization").at("stddev").get<std::vector<double>>();
    c.feature_fingerprint = side.at("feature_fingerprint").get<std::string>();
    c.config = train::parse_train_config(side.at("train_config").dump());
    c.best_epoch = side.at("training").at("best_epoch").get<std::size_t>();
    c.best_val_accuracy = side.at("training").at("best_val_accuracy").get<double>();
    c.test_files = side.at("split").at("test").get<std::vector<std::string>>();
    const fs::path weights = sidecar.parent_path() / side.at("weights").get<std::string>();
    c.net->import_weights(nn::read_vxw(weights));
  } catch (const json::exception& e) {
    throw ParseError(sidecar.string() + ": " + e.what());
  }
  if (c.class_labels.size() != c.net->spec().num_classes) {
    throw ParseError(sidecar.string() + ": class label count does not match the model");
  }
  return c;
}

// --- evaluate -------------------------------------------------------------

StageResult run_evaluate(const EvaluateOptions& opts) {
  ensure_dir(opts.out_dir);
  json cfg;
  cfg["all_items"] = opts.all_items;
  cfg["top_k"] = opts.top_k;
  cfg["batch_size"] = opts.batch_size;
  Manifest m("evaluate", cfg);
  auto ckpt = load_checkpoint(opts.checkpoint);
  auto& net = *ckpt.net;
  const fs::path weights_path = opts.checkpoint.extension() == ".vxw"
                                    ? opts.checkpoint
                                    : fs::path(opts.checkpoint).replace_extension(".vxw");
  m.input("checkpoint", file_fingerprint(weights_path));

  const auto fsx = load_feature_dir(opts.data_dir);
  m.input("index", fsx.index_fingerprint);
  if (fsx.fingerprint != ckpt.feature_fingerprint) {
    throw ConfigError("features in " + opts.data_dir.string() +
                      " were extracted with a different configuration than the checkpoint's");
  }
  std::vector<std::size_t> items;
  if (opts.all_items) {
    for (std::size_t i = 0; i < fsx.entries.size(); ++i) items.push_back(i);
  } else {
    std::map<std::string, std::size_t> by_file;
    for (std::size_t i = 0; i < fsx.entries.size(); ++i) by_file[fsx.entries[i].file] = i;
    for (const auto& f : ckpt.test_files) {
      const auto it = by_file.find(f);
      if (it == by_file.end()) throw ConfigError("test item " + f + " missing from the data");
      items.push_back(it->second);
    }
  }
  if (items.empty()) throw ConfigError("nothing to evaluate: the test split is empty");
  const auto data = make_dataset(fsx, items, ckpt.class_labels, ckpt.stats);
  say(opts.log, "evaluating " + net.spec().name + " on " + std::to_string(data.size()) + " items");

  const auto preds = eval::predict(net, data, opts.batch_size);
  auto cm = eval::confusion_matrix(data.labels, preds.predicted, net.spec().num_classes,
                                   ckpt.class_labels);
  auto metrics = eval::metrics_from_confusion(cm);
  metrics.loss = preds.mean_loss;

  const std::string kind = std::string(features::to_string(net.spec().input_kind));
  json mj;
  mj["model"] = net.spec().name;
  mj["features"] = kind;
  mj["label"] = net.spec().name + (kind == "mel" ? "-Mel" : "-MFCC");
  mj["best_val_accuracy"] = ckpt.best_val_accuracy;
  mj["test_accuracy"] = metrics.accuracy;
  mj["test_loss"] = metrics.loss;
  mj["precision"] = metrics.precision;
  mj["recall"] = metrics.recall;
  mj["f1"] = metrics.f1;
  mj["epoch_converged"] = ckpt.best_epoch;
  mj["averaging"] = metrics.averaging;
  mj["num_items"] = data.size();
  mj["num_classes"] = net.spec().num_classes;
  const fs::path metrics_path = opts.out_dir / "metrics.json";
  write_file_atomic(metrics_path, mj.dump(2) + "\n");
  m.output(metrics_path);

  const fs::path cm_path = opts.out_dir / "confusion.csv";
  write_file_atomic(cm_path, eval::confusion_csv(cm));
  m.output(cm_path);
  const std::size_t k = std::min(opts.top_k, cm.num_classes);
  const fs::path top_path = opts.out_dir / ("confusion-top" + std::to_string(k) + ".csv");
  write_file_atomic(top_path, eval::confusion_csv(eval::topk_confusion(cm, k)));
  m.output(top_path);

  std::string pred_csv = "file,true_speaker,predicted_speaker,confidence\n";
  const std::size_t nk = net.spec().num_classes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float conf = preds.probabilities[i * nk + preds.predicted[i]];
    pred_csv += fsx.entries[items[i]].file + "," + ckpt.class_labels[data.labels[i]] + "," +
                ckpt.class_labels[preds.predicted[i]] + "," + format_real(conf, "%.6f") + "\n";
  }
  const fs::path pred_path = opts.out_dir / "predictions.csv";
  write_file_atomic(pred_path, pred_csv);
  m.output(pred_path);
  say(opts.log, "test accuracy " + format_real(metrics.accuracy) + " loss " +
                    format_real(metrics.loss));
  return finish(m, opts.out_dir, mj.dump());
}

// --- bias -----------------------------------------------------------------

StageResult run_bias(const BiasOptions& opts) {
  ensure_dir(opts.out_dir);
  Manifest m("bias", json::object());
  const std::string text = read_file(opts.predictions);
  m.input("predictions", "fnv1a64:" + hex64(fnv1a64(text)));
  m.input("metadata", file_fingerprint(opts.metadata));
  const auto metadata = audio::read_metadata_csv(opts.metadata);

  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (line_no == 1) {
      if (f.size() < 3 || f[1] != "true_speaker" || f[2] != "predicted_speaker") {
        throw ParseError(opts.predictions.string() +
                         ": expected header file,true_speaker,predicted_speaker");
      }
      continue;
    }
    if (f.size() < 3) {
      throw ParseError(opts.predictions.string() + " line " + std::to_string(line_no) +
                       ": expected at least 3 fields");
    }
    rows.emplace_back(f[1], f[2]);
  }
  if (rows.empty()) throw ConfigError(opts.predictions.string() + " holds no predictions");

  std::set<std::string> speakers;
  for (const auto& [t, p] : rows) {
    speakers.insert(t);
    speakers.insert(p);
  }
  const std::vector<std::string> labels(speakers.begin(), speakers.end());
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
  for (const auto& [t, p] : rows) {
    truth.push_back(label_index(labels, t));
    predicted.push_back(label_index(labels, p));
  }
  const auto report = bias::bias_report(truth, predicted, labels, metadata);

  const fs::path json_path = opts.out_dir / "bias-report.json";
  write_file_atomic(json_path, bias::bias_report_json(report));
  m.output(json_path);
  const fs::path gender_path = opts.out_dir / "bias-gender.csv";
  write_file_atomic(gender_path, bias::group_csv(report.gender));
  m.output(gender_path);
  const fs::path accent_path = opts.out_dir / "bias-accent.csv";
  write_file_atomic(accent_path, bias::group_csv(report.accent));
  m.output(accent_path);
  say(opts.log, "gender disparity " + format_real(report.gender.disparity) +
                    ", accent disparity " + format_real(report.accent.disparity));
  json summary;
  summary["gender_disparity"] = report.gender.disparity;
  summary["accent_disparity"] = report.accent.disparity;
  return finish(m, opts.out_dir, summary.dump());
}

// --- tune -----------------------------------------------------------------

StageResult run_tune(const TuneOptions& opts) {
  ensure_dir(opts.out_dir);
  train::TrainConfig tcfg = opts.config;
  tcfg.validate();
  json cfg;
  cfg["model"] = opts.model;
  cfg["trials"] = opts.trials;
  cfg["train"] = json::parse(train::serialize_train_config(tcfg));
  cfg["split"] = split_config_json(opts.split);
  cfg["seed"] = opts.seed;
  Manifest m("tune", cfg);

  auto p = prepare(opts.data_dir, opts.model, opts.split, opts.seed);
  m.input("index", p.fsx.index_fingerprint);
  std::vector<std::string> warnings;
  const auto trials = tune::sample_trials(opts.trials, p.spec, tune::SearchSpace{}, opts.seed,
                                          &warnings);
  for (const auto& w : warnings) say(opts.log, "warning: " + w);

  const fs::path results = opts.out_dir / "tuning-results.jsonl";
  const auto outcome = tune::run_search(
      trials, p.spec, p.train_set, p.val_set, p.fsx.matrices.front().bands(),
      p.fsx.matrices.front().frames(), tcfg, results, [&](const tune::TrialResult& r) {
        say(opts.log, "trial " + std::to_string(r.trial.trial_id) + "/" +
                          std::to_string(trials.size()) + " val_acc " +
                          format_real(r.best_val_accuracy) + (r.diverged ? " (diverged)" : ""));
      });
  if (outcome.resumed > 0) {
    say(opts.log, "resumed " + std::to_string(outcome.resumed) + " completed trials");
  }
  m.output(results);
  const fs::path best = opts.out_dir / "best-trial.json";
  write_file_atomic(best, tune::best_trial_json(outcome));
  m.output(best);
  return finish(m, opts.out_dir, tune::trial_result_json(outcome.results[outcome.winner]));
}

// --- report ---------------------------------------------------------------

StageResult run_report(const ReportOptions& opts) {
  if (opts.metrics.empty()) throw InvalidArgumentError("report needs at least one metrics file");
  if (!opts.train_logs.empty() && opts.train_logs.size() != opts.metrics.size()) {
    throw InvalidArgumentError("got " + std::to_string(opts.train_logs.size()) +
                               " train logs for " + std::to_string(opts.metrics.size()) +
                               " metrics files");
  }
  if (opts.out_file.empty()) throw InvalidArgumentError("report output path is required");
  const fs::path dir = opts.out_file.has_parent_path() ? opts.out_file.parent_path() : ".";
  ensure_dir(dir);
  Manifest m("report", json::object());

  std::string csv = std::string(kReportHeader) + "\n";
  for (std::size_t i = 0; i < opts.metrics.size(); ++i) {
    const std::string text = read_file(opts.metrics[i]);
    m.input(relative_name(opts.metrics[i], dir), "fnv1a64:" + hex64(fnv1a64(text)));
    json j;
    try {
      j = json::parse(text);
      std::string minutes = "N/A";
      if (!opts.train_logs.empty()) {
        const std::string log_text = read_file(opts.train_logs[i]);
        m.input(relative_name(opts.train_logs[i], dir), "fnv1a64:" + hex64(fnv1a64(log_text)));
        double seconds = 0.0;
        std::istringstream in(log_text);
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty()) seconds += json::parse(line).at("wall_seconds").get<double>();
        }
        minutes = format_real(seconds / 60.0, "%.2f");
      }
      csv += j.at("label").get<std::string>() + "," +
             format_real(j.at("best_val_accuracy").get<double>()) + "," +
             format_real(j.at("test_accuracy").get<double>()) + "," +
             format_real(j.at("test_loss").get<double>()) + "," +
             format_real(j.at("precision").get<double>()) + "," +
             format_real(j.at("recall").get<double>()) + "," +
             format_real(j.at("f1").get<double>()) + "," +
             std::to_string(j.at("epoch_converged").get<std::size_t>()) + "," + minutes + "\n";
    } catch (const json::exception& e) {
      throw ParseError(opts.metrics[i].string() + ": " + e.what());
    }
  }
  write_file_atomic(opts.out_file, csv);
  m.output(opts.out_file);
  say(opts.log, "wrote " + std::to_string(opts.metrics.size()) + " rows to " +
                    opts.out_file.string());
  return finish(m, dir);
}

}  // namespace voxid::pipeline
