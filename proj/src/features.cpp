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

#include "voxid/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "voxid/errors.hpp"
#include "voxid/util.hpp"

namespace voxid::features {

namespace {

// The FFTW planner is not reentrant; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(),
                                 FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_.get(); }
  const fftw_complex* output() const { return out_.get(); }
  void execute() { fftw_execute(plan_); }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  fftw_plan plan_ = nullptr;
};

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

Matrix log_mel(const audio::AudioClip& clip, const StftConfig& cfg,
               std::size_t n_mels, double f_min, double f_max) {
  const Matrix power = stft_power(clip.samples, cfg);
  const Matrix fb = mel_filterbank(n_mels, cfg.fft_size, clip.sample_rate_hz, f_min, f_max);
  Matrix out(n_mels, power.cols);
  for (std::size_t m = 0; m < n_mels; ++m) {
    for (std::size_t t = 0; t < power.cols; ++t) {
      double acc = 0.0;
      for (std::size_t k = 0; k < power.rows; ++k) acc += fb(m, k) * power(k, t);
      out(m, t) = 10.0 * std::log10(std::max(acc, kLogFloor));
    }
  }
  return out;
}

ExtractionConfig config_for(FeatureKind kind, const audio::AudioClip& clip,
                            const StftConfig& cfg, std::size_t n_mels,
                            std::size_t n_mfcc, double f_min, double f_max) {
  ExtractionConfig ec;
  ec.kind = kind;
  ec.stft = cfg;
  ec.n_mels = n_mels;
  ec.n_mfcc = n_mfcc;
  ec.f_min = f_min;
  ec.f_max = f_max;
  ec.sample_rate_hz = clip.sample_rate_hz;
  return ec;
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kMelSpectrogram ? "mel" : "mfcc";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "mel" || text == "mel_spectrogram") return FeatureKind::kMelSpectrogram;
  if (text == "mfcc") return FeatureKind::kMfcc;
  throw ParseError("unknown feature kind '" + std::string(text) +
                   "' (expected mel or mfcc)");
}

void validate(const StftConfig& cfg) {
  if (cfg.window_length == 0 || cfg.hop == 0) {
    throw ConfigError("STFT window and hop must be positive");
  }
  if (!is_power_of_two(cfg.fft_size)) {
    throw ConfigError("FFT size " + std::to_string(cfg.fft_size) +
                      " is not a power of two");
  }
  if (cfg.window_length > cfg.fft_size) {
    throw ConfigError("window length exceeds FFT size");
  }
  if (cfg.hop > cfg.window_length) {
    throw ConfigError("hop exceeds window length");
  }
}

std::string ExtractionConfig::canonical() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "kind=" << to_string(kind) << ";sr=" << sample_rate_hz
     << ";window=hann:" << stft.window_length << ";hop=" << stft.hop
     << ";fft=" << stft.fft_size << ";n_mels=" << n_mels;
  if (kind == FeatureKind::kMfcc) ss << ";n_mfcc=" << n_mfcc;
  ss << ";f_min=" << f_min << ";f_max=" << f_max << ";log_floor=" << kLogFloor
     << ";preemphasis=" << preemphasis << ";chunk_s=" << chunk_seconds;
  return ss.str();
}

std::string ExtractionConfig::fingerprint() const {
  return "fnv1a64:" + hex64(fnv1a64(canonical()));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t frame_count(std::size_t samples, const StftConfig& cfg) {
  if (samples < cfg.window_length) return 0;
  return (samples - cfg.window_length) / cfg.hop + 1;
}

Matrix stft_power(std::span<const double> samples, const StftConfig& cfg) {
  validate(cfg);
  if (samples.size() < cfg.window_length) {
    throw InvalidArgumentError(
        "signal has " + std::to_string(samples.size()) +
        " samples; at least one window (" + std::to_string(cfg.window_length) +
        " samples) is required");
  }
  const std::size_t frames = frame_count(samples.size(), cfg);
  const std::size_t bins = cfg.fft_size / 2 + 1;
  const std::vector<double> window = hann_window(cfg.window_length);

  RealFft fft(cfg.fft_size);
  Matrix out(bins, frames);
  for (std::size_t t = 0; t < frames; ++t) {
    double* in = fft.input();
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.window_length; ++i) {
      in[i] = samples[start + i] * window[i];
    }
    for (std::size_t i = cfg.window_length; i < cfg.fft_size; ++i) in[i] = 0.0;
    fft.execute();
    const fftw_complex* spec = fft.output();
    for (std::size_t k = 0; k < bins; ++k) {
      out(k, t) = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    }
  }
  return out;
}

Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_size, int sample_rate_hz,
                      double f_min, double f_max) {
  if (n_mels < 2) throw ConfigError("n_mels must be at least 2");
  if (sample_rate_hz <= 0) throw ConfigError("sample rate must be positive");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate_hz / 2.0)) {
    throw ConfigError("mel band edges must satisfy 0 <= f_min < f_max <= rate/2");
  }
  if (!is_power_of_two(fft_size)) throw ConfigError("FFT size must be a power of two");

  const std::size_t bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  // n_mels + 2 points: left edge, n_mels centers, right edge.
  std::vector<std::size_t> point_bin(n_mels + 2);
  for (std::size_t i = 0; i < n_mels + 2; ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                    static_cast<double>(n_mels + 1);
    const double hz = mel_to_hz(mel);
    point_bin[i] = static_cast<std::size_t>(
        std::llround(hz * static_cast<double>(fft_size) / sample_rate_hz));
  }
  for (std::size_t i = 1; i < point_bin.size(); ++i) {
    if (point_bin[i] == point_bin[i - 1]) {
      // Point i is the center of filter i-1 (0-based), bounded by its neighbours.
      const std::string a = i - 1 == 0 ? "left band edge" : "filter " + std::to_string(i - 2);
      const std::string b = i == n_mels + 1 ? "right band edge" : "filter " + std::to_string(i - 1);
      throw ConfigError("mel filterbank is degenerate: " + a + " and " + b +
                        " both map to FFT bin " + std::to_string(point_bin[i]) +
                        "; reduce n_mels or increase fft_size");
    }
  }

  Matrix fb(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = static_cast<double>(point_bin[m]);
    const double center = static_cast<double>(point_bin[m + 1]);
    const double right = static_cast<double>(point_bin[m + 2]);
    for (std::size_t k = point_bin[m]; k <= point_bin[m + 2] && k < bins; ++k) {
      const double kd = static_cast<double>(k);
      const double w = kd <= center ? (kd - left) / (center - left)
                                    : (right - kd) / (right - center);
      fb(m, k) = std::max(w, 0.0);
    }
  }
  return fb;
}

Matrix dct2_matrix(std::size_t n) {
  Matrix d(n, n);
  const double n_d = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_d) : std::sqrt(2.0 / n_d);
    for (std::size_t i = 0; i < n; ++i) {
      d(k, i) = scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                 (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n_d));
    }
  }
  return d;
}

FeatureMatrix mel_spectrogram(const audio::AudioClip& clip, const StftConfig& cfg,
                              std::size_t n_mels, double f_min, double f_max) {
  FeatureMatrix fm;
  fm.kind = FeatureKind::kMelSpectrogram;
  fm.values = log_mel(clip, cfg, n_mels, f_min, f_max);
  fm.config_fingerprint =
      config_for(fm.kind, clip, cfg, n_mels, 0, f_min, f_max).fingerprint();
  return fm;
}

FeatureMatrix mfcc(const audio::AudioClip& clip, const StftConfig& cfg,
                   std::size_t n_mels, std::size_t n_mfcc, double f_min,
                   double f_max) {
  if (n_mfcc == 0 || n_mfcc > n_mels) {
    throw ConfigError("n_mfcc (" + std::to_string(n_mfcc) +
                      ") must be in [1, n_mels=" + std::to_string(n_mels) + "]");
  }
  const Matrix lm = log_mel(clip, cfg, n_mels, f_min, f_max);
  const Matrix dct = dct2_matrix(n_mels);
  FeatureMatrix fm;
  fm.kind = FeatureKind::kMfcc;
  fm.values = Matrix(n_mfcc, lm.cols);
  for (std::size_t c = 0; c < n_mfcc; ++c) {
    for (std::size_t t = 0; t < lm.cols; ++t) {
      double acc = 0.0;
      for (std::size_t m = 0; m < n_mels; ++m) acc += dct(c, m) * lm(m, t);
      fm.values(c, t) = acc;
    }
  }
  fm.config_fingerprint =
      config_for(fm.kind, clip, cfg, n_mels, n_mfcc, f_min, f_max).fingerprint();
  return fm;
}

FeatureMatrix extract(const audio::AudioClip& clip, const ExtractionConfig& cfg) {
  if (clip.sample_rate_hz != cfg.sample_rate_hz) {
    throw InvalidArgumentError("clip rate " + std::to_string(clip.sample_rate_hz) +
                               " Hz does not match extraction rate " +
                               std::to_string(cfg.sample_rate_hz) + " Hz");
  }
  FeatureMatrix fm = cfg.kind == FeatureKind::kMelSpectrogram
                         ? mel_spectrogram(clip, cfg.stft, cfg.n_mels, cfg.f_min, cfg.f_max)
                         : mfcc(clip, cfg.stft, cfg.n_mels, cfg.n_mfcc, cfg.f_min, cfg.f_max);
  fm.config_fingerprint = cfg.fingerprint();
  return fm;
}

BandStats compute_band_stats(std::span<const FeatureMatrix> matrices) {
  if (matrices.empty()) throw InvalidArgumentError("no matrices for band statistics");
  const std::size_t bands = matrices.front().bands();
  BandStats stats{std::vector<double>(bands, 0.0), std::vector<double>(bands, 0.0)};
  std::vector<double> count(bands, 0.0);
  for (const auto& m : matrices) {
    if (m.bands() != bands) {
      throw ShapeError("band count mismatch: " + std::to_string(m.bands()) +
                       " vs " + std::to_string(bands));
    }
    for (std::size_t b = 0; b < bands; ++b) {
      for (std::size_t t = 0; t < m.frames(); ++t) stats.mean[b] += m.values(b, t);
      count[b] += static_cast<double>(m.frames());
    }
  }
  for (std::size_t b = 0; b < bands; ++b) stats.mean[b] /= count[b];
  for (const auto& m : matrices) {
    for (std::size_t b = 0; b < bands; ++b) {
      for (std::size_t t = 0; t < m.frames(); ++t) {
        const double d = m.values(b, t) - stats.mean[b];
        stats.stddev[b] += d * d;
      }
    }
  }
  for (std::size_t b = 0; b < bands; ++b) {
    stats.stddev[b] = std::sqrt(stats.stddev[b] / count[b]);
  }
  return stats;
}

FeatureMatrix normalize_features(const FeatureMatrix& m, const BandStats& stats) {
  if (stats.mean.size() != m.bands() || stats.stddev.size() != m.bands()) {
    throw ShapeError("normalization stats have " + std::to_string(stats.mean.size()) +
                     " bands but the matrix has " + std::to_string(m.bands()));
  }
  FeatureMatrix out = m;
  std::string stats_bytes;
  for (std::size_t b = 0; b < m.bands(); ++b) {
    const double denom = std::max(stats.stddev[b], 1e-8);
    for (std::size_t t = 0; t < m.frames(); ++t) {
      out.values(b, t) = (m.values(b, t) - stats.mean[b]) / denom;
    }
    stats_bytes.append(reinterpret_cast<const char*>(&stats.mean[b]), sizeof(double));
    stats_bytes.append(reinterpret_cast<const char*>(&stats.stddev[b]), sizeof(double));
  }
  out.config_fingerprint =
      "fnv1a64:" + hex64(fnv1a64(m.config_fingerprint + ";norm=" + hex64(fnv1a64(stats_bytes))));
  return out;
}

std::string encode_vxf(const FeatureMatrix& m) {
  std::string out = "VXF1";
  put_u32(out, static_cast<std::uint32_t>(m.kind));
  put_u32(out, static_cast<std::uint32_t>(m.bands()));
  put_u32(out, static_cast<std::uint32_t>(m.frames()));
  out.reserve(out.size() + m.values.data.size() * 4 + m.config_fingerprint.size());
  for (double v : m.values.data) put_f32(out, static_cast<float>(v));
  out += m.config_fingerprint;
  return out;
}

FeatureMatrix decode_vxf(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != "VXF1") {
    throw DecodeError("not a VXF1 feature file (bad magic)");
  }
  const std::uint32_t kind = get_u32(bytes, 4);
  if (kind > 1) throw DecodeError("VXF1: unknown feature kind " + std::to_string(kind));
  const std::size_t bands = get_u32(bytes, 8);
  const std::size_t frames = get_u32(bytes, 12);
  const std::size_t payload = bands * frames * 4;
  if (16 + payload > bytes.size()) throw DecodeError("VXF1: truncated payload");
  FeatureMatrix m;
  m.kind = static_cast<FeatureKind>(kind);
  m.values = Matrix(bands, frames);
  for (std::size_t i = 0; i < bands * frames; ++i) {
    m.values.data[i] = get_f32(bytes, 16 + 4 * i);
  }
  m.config_fingerprint = std::string(bytes.substr(16 + payload));
  return m;
}

void write_vxf(const std::filesystem::path& path, const FeatureMatrix& m) {
  write_file_atomic(path, encode_vxf(m));
}

FeatureMatrix read_vxf(const std::filesystem::path& path) {
  try {
    return decode_vxf(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::string format_index_csv(std::span<const IndexEntry> entries) {
  std::string out = "file,speaker_id\n";
  for (const auto& e : entries) out += e.file + "," + e.speaker_id + "\n";
  return out;
}

std::vector<IndexEntry> parse_index_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("feature index is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "file,speaker_id") {
    throw ParseError("feature index header must be 'file,speaker_id'");
  }
  std::vector<IndexEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("feature index line " + std::to_string(line_no) +
                       ": expected 'file,speaker_id'");
    }
    entries.push_back({std::move(fields[0]), std::move(fields[1])});
  }
  return entries;
}

}  // namespace voxid::features
