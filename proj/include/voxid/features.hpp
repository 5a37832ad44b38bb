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

// Spectral front end: STFT power, mel filterbank, log-mel spectrogram and
// MFCC, plus per-band standardization and the VXF1 feature container.

#ifndef VOXID_FEATURES_HPP_
#define VOXID_FEATURES_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxid/audio.hpp"

namespace voxid::features {

enum class FeatureKind : std::uint32_t { kMelSpectrogram = 0, kMfcc = 1 };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

// Row-major 2-D array of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct StftConfig {
  std::size_t window_length = 400;
  std::size_t hop = 160;
  std::size_t fft_size = 512;
};

void validate(const StftConfig& cfg);

// Everything that determines the numeric content of a feature matrix.
struct ExtractionConfig {
  FeatureKind kind = FeatureKind::kMelSpectrogram;
  StftConfig stft;
  std::size_t n_mels = 64;
  std::size_t n_mfcc = 13;
  double f_min = 0.0;
  double f_max = 8000.0;
  int sample_rate_hz = audio::kPipelineSampleRate;
  double preemphasis = audio::kDefaultPreemphasis;
  double chunk_seconds = 3.0;

  std::size_t bands() const {
    return kind == FeatureKind::kMelSpectrogram ? n_mels : n_mfcc;
  }
  // Canonical text form; the fingerprint is a hash of this string.
  std::string canonical() const;
  std::string fingerprint() const;
};

struct FeatureMatrix {
  Matrix values;  // bands x frames
  FeatureKind kind = FeatureKind::kMelSpectrogram;
  std::string config_fingerprint;

  std::size_t bands() const { return values.rows; }
  std::size_t frames() const { return values.cols; }
};

inline constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

std::size_t frame_count(std::size_t samples, const StftConfig& cfg);

// [fft_size/2 + 1] x frames.
Matrix stft_power(std::span<const double> samples, const StftConfig& cfg);

// [n_mels] x [fft_size/2 + 1]; peak-normalized triangles on FFT bins.
Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_size, int sample_rate_hz,
                      double f_min, double f_max);

// Orthonormal DCT-II basis, [n] x [n].
Matrix dct2_matrix(std::size_t n);

FeatureMatrix mel_spectrogram(const audio::AudioClip& clip, const StftConfig& cfg,
                              std::size_t n_mels, double f_min, double f_max);

FeatureMatrix mfcc(const audio::AudioClip& clip, const StftConfig& cfg,
                   std::size_t n_mels, std::size_t n_mfcc, double f_min,
                   double f_max);

// Dispatches on cfg.kind. Pre-emphasis and chunking are not applied here.
FeatureMatrix extract(const audio::AudioClip& clip, const ExtractionConfig& cfg);

struct BandStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Per-band mean and population standard deviation over every frame of every
// matrix.
BandStats compute_band_stats(std::span<const FeatureMatrix> matrices);

FeatureMatrix normalize_features(const FeatureMatrix& m, const BandStats& stats);

// VXF1 container. Values are stored as float32, so a written matrix reads
// back rounded to single precision.
std::string encode_vxf(const FeatureMatrix& m);
FeatureMatrix decode_vxf(std::string_view bytes);
void write_vxf(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_vxf(const std::filesystem::path& path);

struct IndexEntry {
  std::string file;  // relative to the index directory
  std::string speaker_id;
};

std::string format_index_csv(std::span<const IndexEntry> entries);
std::vector<IndexEntry> parse_index_csv(std::string_view text);

}  // namespace voxid::features

#endif  // VOXID_FEATURES_HPP_
