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

#include "voxid/voxid.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxid/audio.hpp"
#include "voxid/errors.hpp"
#include "voxid/evaluator.hpp"
#include "voxid/features.hpp"
#include "voxid/model.hpp"
#include "voxid/pipeline.hpp"

struct vx_model {
  voxid::pipeline::LoadedCheckpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
vx_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;
bool g_log_default = true;

voxid::pipeline::Logger current_logger() {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_default) return voxid::pipeline::stderr_logger();
  if (g_log_fn == nullptr) return {};
  const vx_log_fn fn = g_log_fn;
  void* user = g_log_user;
  return [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

// Runs `fn`, translating exceptions into status codes and the thread's
// last-error message.
template <typename Fn>
vx_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return VX_OK;
  } catch (const voxid::Error& e) {
    g_last_error = e.what();
    return static_cast<vx_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VX_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VX_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw voxid::InvalidArgumentError(std::string(what) + " must not be NULL");
}

std::string str_or(const char* s, const char* fallback) {
  return s != nullptr ? s : fallback;
}

voxid::features::FeatureKind to_kind(vx_feature_kind k) {
  switch (k) {
    case VX_FEATURES_MEL:
      return voxid::features::FeatureKind::kMelSpectrogram;
    case VX_FEATURES_MFCC:
      return voxid::features::FeatureKind::kMfcc;
  }
  throw voxid::InvalidArgumentError("unknown feature kind " + std::to_string(static_cast<int>(k)));
}

}  // namespace

extern "C" {

const char* vx_version(void) { return "0.1.0"; }

const char* vx_last_error(void) { return g_last_error.c_str(); }

const char* vx_status_name(vx_status status) {
  switch (status) {
    case VX_OK: return "ok";
    case VX_ERR_INVALID_ARGUMENT: return "invalid argument";
    case VX_ERR_IO: return "i/o error";
    case VX_ERR_DECODE: return "decode error";
    case VX_ERR_UNSUPPORTED: return "unsupported format";
    case VX_ERR_SHAPE: return "shape error";
    case VX_ERR_CONFIG: return "config error";
    case VX_ERR_INDEX: return "index error";
    case VX_ERR_STATE: return "state error";
    case VX_ERR_NUMERIC: return "numeric error";
    case VX_ERR_BUILD: return "build error";
    case VX_ERR_PARSE: return "parse error";
    case VX_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void vx_string_free(char* s) { std::free(s); }

void vx_set_logger(vx_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_default = false;
  g_log_fn = fn;
  g_log_user = user;
}

void vx_synth_options_init(vx_synth_options* o) {
  if (o == nullptr) return;
  const voxid::pipeline::SynthOptions d;
  *o = {nullptr, d.speakers, d.utterances, d.duration_s, d.accents, d.seed, d.threads};
}

vx_status vx_synth_corpus(const vx_synth_options* o, char** summary) {
  return guarded([&] {
    require(o, "options");
    require(o->out_dir, "out_dir");
    voxid::pipeline::SynthOptions p;
    p.out_dir = o->out_dir;
    p.speakers = o->speakers;
    p.utterances = o->utterances;
    p.duration_s = o->duration_s;
    p.accents = o->accents;
    p.seed = o->seed;
    p.threads = o->threads;
    p.log = current_logger();
    emit(summary, voxid::pipeline::run_synth(p).summary);
  });
}

void vx_extract_options_init(vx_extract_options* o) {
  if (o == nullptr) return;
  *o = {nullptr, nullptr, VX_FEATURES_MEL, 1};
}

vx_status vx_extract(const vx_extract_options* o, char** summary) {
  return guarded([&] {
    require(o, "options");
    require(o->corpus_dir, "corpus_dir");
    require(o->out_dir, "out_dir");
    voxid::pipeline::ExtractOptions p;
    p.corpus_dir = o->corpus_dir;
    p.out_dir = o->out_dir;
    p.kind = to_kind(o->kind);
    p.threads = o->threads;
    p.log = current_logger();
    emit(summary, voxid::pipeline::run_extract(p).summary);
  });
}

void vx_train_options_init(vx_train_options* o) {
  if (o == nullptr) return;
  const voxid::pipeline::TrainOptions d;
  *o = {nullptr, nullptr, nullptr, d.config.learning_rate, d.config.batch_size,
        d.config.max_epochs, d.config.patience, {d.split[0], d.split[1], d.split[2]}, d.seed};
}

vx_status vx_train(const vx_train_options* o, char** summary) {
  return guarded([&] {
    require(o, "options");
    require(o->data_dir, "data_dir");
    require(o->out_dir, "out_dir");
    voxid::pipeline::TrainOptions p;
    p.data_dir = o->data_dir;
    p.model = str_or(o->model, "model-1");
    p.out_dir = o->out_dir;
    p.config.learning_rate = o->learning_rate;
    p.config.batch_size = o->batch_size;
    p.config.max_epochs = o->max_epochs;
    p.config.patience = o->patience;
    p.split = {o->split[0], o->split[1], o->split[2]};
    p.seed = o->seed;
    p.log = current_logger();
    emit(summary, voxid::pipeline::run_train(p).summary);
  });
}

void vx_evaluate_options_init(vx_evaluate_options* o) {
  if (o == nullptr) return;
  const voxid::pipeline::EvaluateOptions d;
  *o = {nullptr, nullptr, nullptr, 0, d.top_k, d.batch_size};
}

vx_status vx_evaluate(const vx_evaluate_options* o, char** summary) {
  return guarded([&] {
    require(o, "options");
    require(o->checkpoint, "checkpoint");
    require(o->data_dir, "data_dir");
    require(o->out_dir, "out_dir");
    voxid::pipeline::EvaluateOptions p;
    p.checkpoint = o->checkpoint;
    p.data_dir = o->data_dir;
    p.out_dir = o->out_dir;
    p.all_items = o->all_items != 0;
    p.top_k = o->top_k;
    p.batch_size = o->batch_size;
    p.log = current_logger();
    emit(summary, voxid::pipeline::run_evaluate(p).summary);
  });
}

void vx_bias_options_init(vx_bias_options* o) {
  if (o == nullptr) return;
  *o = {nullptr, nullptr, nullptr};
}

vx_status vx_bias(const vx_bias_options* o, char** summary) {
  return guarded([&] {
    require(o, "options");
    require(o->predictions, "predictions");
    require(o->metadata, "metadata");
    require(o->out_dir, "out_dir");
    voxid::pipeline::BiasOptions p;
    p.predictions = o->predictions;
    p.metadata = o->metadata;
    p.out_dir = o->out_dir;
    p.log = current_logger();
    emit(summary, voxid::pipeline::run_bias(p).summary);
  });
}

void vx_tune_options_init(vx_tune_options* o) {
  if (o == nullptr) return;
  const voxid::pipeline::TuneOptions d;
  *o = {nullptr,
        nullptr,
        nullptr,
        d.trials,
        d.config.batch_size,
        d.config.max_epochs,
        d.config.patience,
        {d.split[0], d.split[1], d.split[2]},
        d.seed};
}

vx_status vx_tune(const vx_tune_options* o, char** summary) {
  return guarded([&] {
    require(o, "options");
    require(o->data_dir, "data_dir");
    require(o->out_dir, "out_dir");
    voxid::pipeline::TuneOptions p;
    p.data_dir = o->data_dir;
    p.model = str_or(o->model, "model-1");
    p.out_dir = o->out_dir;
    p.trials = o->trials;
    p.config.batch_size = o->batch_size;
    p.config.max_epochs = o->max_epochs;
    p.config.patience = o->patience;
    p.split = {o->split[0], o->split[1], o->split[2]};
    p.seed = o->seed;
    p.log = current_logger();
    emit(summary, voxid::pipeline::run_tune(p).summary);
  });
}

void vx_report_options_init(vx_report_options* o) {
  if (o == nullptr) return;
  *o = {nullptr, 0, nullptr, 0, nullptr};
}

vx_status vx_report(const vx_report_options* o) {
  return guarded([&] {
    require(o, "options");
    require(o->out_file, "out_file");
    if (o->metrics_count > 0) require(o->metrics, "metrics");
    if (o->train_logs_count > 0) require(o->train_logs, "train_logs");
    voxid::pipeline::ReportOptions p;
    for (size_t i = 0; i < o->metrics_count; ++i) p.metrics.emplace_back(o->metrics[i]);
    for (size_t i = 0; i < o->train_logs_count; ++i) p.train_logs.emplace_back(o->train_logs[i]);
    p.out_file = o->out_file;
    p.log = current_logger();
    voxid::pipeline::run_report(p);
  });
}

const char* vx_preset_names(void) {
  static const std::string joined = [] {
    std::string s;
    for (const auto& n : voxid::model::preset_names()) {
      s += n;
      s.push_back('\0');
    }
    s.push_back('\0');
    return s;
  }();
  return joined.data();
}

vx_status vx_preset_spec(const char* name, size_t num_classes, vx_feature_kind kind,
                         char** spec_json) {
  return guarded([&] {
    require(name, "name");
    require(spec_json, "spec_json");
    *spec_json = dup_string(voxid::model::serialize_spec(
        voxid::model::preset(name, num_classes, to_kind(kind))));
  });
}

vx_status vx_spec_trace(const char* spec_json, size_t bands, size_t frames, char** trace_json) {
  return guarded([&] {
    require(spec_json, "spec_json");
    require(trace_json, "trace_json");
    const auto spec = voxid::model::parse_spec(spec_json);
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& e : voxid::model::trace_shapes(spec, bands, frames)) {
      out.push_back({{"layer", e.layer}, {"shape", e.shape}});
    }
    *trace_json = dup_string(out.dump());
  });
}

vx_status vx_model_load(const char* path, vx_model** out) {
  return guarded([&] {
    require(path, "checkpoint_path");
    require(out, "out");
    *out = nullptr;
    auto m = std::make_unique<vx_model>();
    m->ckpt = voxid::pipeline::load_checkpoint(path);
    *out = m.release();
  });
}

void vx_model_free(vx_model* model) { delete model; }

size_t vx_model_num_classes(const vx_model* model) {
  return model != nullptr ? model->ckpt.class_labels.size() : 0;
}

const char* vx_model_class_label(const vx_model* model, size_t index) {
  if (model == nullptr || index >= model->ckpt.class_labels.size()) return nullptr;
  return model->ckpt.class_labels[index].c_str();
}

void vx_model_input_shape(const vx_model* model, size_t* bands, size_t* frames) {
  if (bands != nullptr) *bands = model != nullptr ? model->ckpt.net->bands() : 0;
  if (frames != nullptr) *frames = model != nullptr ? model->ckpt.net->frames() : 0;
}

namespace {

std::vector<size_t> classify(vx_model& m, std::vector<voxid::features::FeatureMatrix> raw,
                             std::vector<float>* probabilities) {
  voxid::Dataset data;
  for (auto& fm : raw) data.add(voxid::features::normalize_features(fm, m.ckpt.stats), 0);
  const auto preds = voxid::eval::predict(*m.ckpt.net, data);
  if (probabilities != nullptr) *probabilities = preds.probabilities;
  return preds.predicted;
}

}  // namespace

vx_status vx_model_predict(vx_model* model, const float* features, size_t bands, size_t frames,
                           size_t* predicted, float* probabilities) {
  return guarded([&] {
    require(model, "model");
    require(features, "features");
    require(predicted, "predicted");
    voxid::features::FeatureMatrix fm;
    fm.kind = model->ckpt.net->spec().input_kind;
    fm.values = voxid::features::Matrix(bands, frames);
    for (size_t i = 0; i < bands * frames; ++i) fm.values.data[i] = features[i];
    std::vector<float> probs;
    const auto out = classify(*model, {std::move(fm)}, &probs);
    *predicted = out.front();
    if (probabilities != nullptr) std::memcpy(probabilities, probs.data(), probs.size() * sizeof(float));
  });
}

vx_status vx_model_predict_wav(vx_model* model, const char* wav_path, size_t* predicted,
                               size_t capacity, size_t* count) {
  return guarded([&] {
    require(model, "model");
    require(wav_path, "wav_path");
    require(count, "count");
    if (capacity > 0) require(predicted, "predicted");
    voxid::features::ExtractionConfig cfg;
    cfg.kind = model->ckpt.net->spec().input_kind;
    if (cfg.fingerprint() != model->ckpt.feature_fingerprint) {
      throw voxid::ConfigError("checkpoint was trained on features from a non-default extraction "
                               "configuration; extract features explicitly instead");
    }
    auto clip = voxid::audio::load_wav(wav_path);
    if (clip.sample_rate_hz != cfg.sample_rate_hz) {
      clip = voxid::audio::resample(clip, cfg.sample_rate_hz);
    }
    std::vector<voxid::features::FeatureMatrix> raw;
    for (const auto& chunk : voxid::audio::chunk_fixed(clip, cfg.chunk_seconds)) {
      raw.push_back(voxid::features::extract(voxid::audio::preemphasis(chunk, cfg.preemphasis), cfg));
    }
    *count = raw.size();
    if (raw.empty()) return;
    const auto out = classify(*model, std::move(raw), nullptr);
    for (size_t i = 0; i < out.size() && i < capacity; ++i) predicted[i] = out[i];
  });
}

}  // extern "C"
