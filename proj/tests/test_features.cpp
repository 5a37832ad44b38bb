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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "support/testing.hpp"
#include "voxid/errors.hpp"
#include "voxid/features.hpp"

namespace {

namespace fx = voxid::features;
using voxid::audio::AudioClip;

AudioClip sine_clip(double hz, std::size_t n, double amp = 0.5, int rate = 16000) {
  AudioClip c;
  c.sample_rate_hz = rate;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  }
  return c;
}

AudioClip noise_clip(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AudioClip c;
  c.samples.resize(n);
  for (auto& s : c.samples) s = voxid::testing::uniform(rng, -0.5, 0.5);
  return c;
}

}  // namespace

TEST_CASE("mel scale closed forms and round-trip") {
  CHECK(fx::hz_to_mel(0.0) == 0.0);
  CHECK(fx::hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(fx::hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-4));
  CHECK(fx::hz_to_mel(1000.0) == doctest::Approx(999.99).epsilon(1e-4));
  double prev = -1.0;
  for (double f = 0.0; f <= 8000.0; f += 7.3) {
    const double m = fx::hz_to_mel(f);
    CHECK(m > prev);
    prev = m;
    const double back = fx::mel_to_hz(m);
    CHECK(std::abs(back - f) <= 1e-9 * std::max(f, 1.0));
  }
}

TEST_CASE("stft framing, silence and tone bin") {
  const fx::StftConfig cfg;
  CHECK(fx::frame_count(48000, cfg) == 298);
  const auto zero = fx::stft_power(std::vector<double>(1600, 0.0), cfg);
  CHECK(zero.rows == 257);
  for (double v : zero.data) CHECK(v == 0.0);

  // 1000 Hz sits exactly on bin 32 of a 512-point FFT at 16 kHz.
  const auto tone = sine_clip(1000.0, 4000);
  const auto p = fx::stft_power(tone.samples, cfg);
  for (std::size_t f = 0; f < p.cols; ++f) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.rows; ++k) {
      if (p(k, f) > p(best, f)) best = k;
    }
    CHECK(best == static_cast<std::size_t>(std::lround(1000.0 * 512 / 16000)));
  }
  CHECK_THROWS_AS(fx::stft_power(std::vector<double>(399, 0.0), cfg), voxid::InvalidArgumentError);

  fx::StftConfig bad;
  bad.fft_size = 500;
  CHECK_THROWS_AS(fx::validate(bad), voxid::ConfigError);
  bad = fx::StftConfig{};
  bad.hop = 401;
  CHECK_THROWS_AS(fx::validate(bad), voxid::ConfigError);
}

TEST_CASE("mel filterbank peaks, centers and coverage") {
  const auto fb = fx::mel_filterbank(64, 512, 16000, 0.0, 8000.0);
  REQUIRE(fb.rows == 64);
  REQUIRE(fb.cols == 257);
  for (std::size_t m = 0; m < fb.rows; ++m) {
    double peak = 0.0;
    for (std::size_t k = 0; k < fb.cols; ++k) {
      CHECK(fb(m, k) >= 0.0);
      peak = std::max(peak, fb(m, k));
    }
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Every bin strictly inside (f_min, f_max) is covered by some filter.
  for (std::size_t k = 1; k + 1 < fb.cols; ++k) {
    double s = 0.0;
    for (std::size_t m = 0; m < fb.rows; ++m) s += fb(m, k);
    CHECK(s > 0.0);
  }

  // Two filters: centers at mel_to_hz of the interior linspace points.
  const auto two = fx::mel_filterbank(2, 512, 16000, 0.0, 8000.0);
  const double top = fx::hz_to_mel(8000.0);
  for (std::size_t m = 0; m < 2; ++m) {
    const double center_hz = fx::mel_to_hz(top * static_cast<double>(m + 1) / 3.0);
    std::size_t argmax = 0;
    for (std::size_t k = 0; k < two.cols; ++k) {
      if (two(m, k) > two(m, argmax)) argmax = k;
    }
    const double bin_hz = static_cast<double>(argmax) * 16000.0 / 512.0;
    CHECK(std::abs(bin_hz - center_hz) <= 16000.0 / 512.0);
  }

  CHECK_THROWS_AS(fx::mel_filterbank(1, 512, 16000, 0.0, 8000.0), voxid::ConfigError);
  CHECK_THROWS_AS(fx::mel_filterbank(64, 512, 16000, 0.0, 9000.0), voxid::ConfigError);
  try {
    fx::mel_filterbank(200, 512, 16000, 0.0, 8000.0);
    FAIL("expected a degenerate filterbank error");
  } catch (const voxid::ConfigError& e) {
    CHECK(std::string(e.what()).find("degenerate") != std::string::npos);
  }
}

TEST_CASE("mel spectrogram floor, shape and gain") {
  const fx::StftConfig cfg;
  AudioClip silent;
  silent.samples.assign(48000, 0.0);
  const auto s = fx::mel_spectrogram(silent, cfg, 64, 0.0, 8000.0);
  CHECK(s.bands() == 64);
  CHECK(s.frames() == 298);
  CHECK(s.kind == fx::FeatureKind::kMelSpectrogram);
  for (double v : s.values.data) CHECK(v == doctest::Approx(-100.0));

  const auto base = noise_clip(8000, 11);
  auto loud = base;
  for (auto& x : loud.samples) x *= 10.0;
  const auto a = fx::mel_spectrogram(base, cfg, 64, 0.0, 8000.0);
  const auto b = fx::mel_spectrogram(loud, cfg, 64, 0.0, 8000.0);
  for (std::size_t i = 0; i < a.values.data.size(); ++i) {
    if (a.values.data[i] > -99.0) {
      CHECK(b.values.data[i] - a.values.data[i] == doctest::Approx(20.0).epsilon(1e-9));
    }
  }

  // Samples past the last full frame do not change the output.
  auto longer = base;
  longer.samples.resize(base.samples.size() + 50, 0.3);  // the next frame needs 80 more
  const auto c = fx::mel_spectrogram(longer, cfg, 64, 0.0, 8000.0);
  CHECK(c.values.data == a.values.data);
  // Identical input gives identical output and fingerprint.
  const auto a2 = fx::mel_spectrogram(base, cfg, 64, 0.0, 8000.0);
  CHECK(a2.values.data == a.values.data);
  CHECK(a2.config_fingerprint == a.config_fingerprint);
}

TEST_CASE("dct basis is orthonormal and mfcc of a constant") {
  const auto d = fx::dct2_matrix(64);
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t j = 0; j < 64; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 64; ++k) dot += d(i, k) * d(j, k);
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) <= 1e-10);
    }
  }
  // Silence gives a constant log-Mel vector of -100 in every frame.
  AudioClip silent;
  silent.samples.assign(48000, 0.0);
  const auto m = fx::mfcc(silent, fx::StftConfig{}, 64, 13, 0.0, 8000.0);
  CHECK(m.bands() == 13);
  CHECK(m.frames() == 298);
  CHECK(m.kind == fx::FeatureKind::kMfcc);
  for (std::size_t f = 0; f < m.frames(); ++f) {
    CHECK(m.values(0, f) == doctest::Approx(-100.0 * std::sqrt(64.0)).epsilon(1e-12));
    for (std::size_t c = 1; c < 13; ++c) CHECK(std::abs(m.values(c, f)) <= 1e-9);
  }
  CHECK_THROWS_AS(fx::mfcc(silent, fx::StftConfig{}, 64, 65, 0.0, 8000.0), voxid::ConfigError);
}

TEST_CASE("full mfcc inverts back to log-mel energies") {
  const auto clip = noise_clip(4000, 5);
  const fx::StftConfig cfg;
  const auto mel = fx::mel_spectrogram(clip, cfg, 32, 0.0, 8000.0);
  const auto cep = fx::mfcc(clip, cfg, 32, 32, 0.0, 8000.0);
  const auto d = fx::dct2_matrix(32);
  for (std::size_t f = 0; f < mel.frames(); ++f) {
    for (std::size_t k = 0; k < 32; ++k) {
      double x = 0.0;
      for (std::size_t c = 0; c < 32; ++c) x += d(c, k) * cep.values(c, f);
      CHECK(std::abs(x - mel.values(k, f)) <= 1e-8);
    }
  }
}

TEST_CASE("normalization identities and self-statistics") {
  const fx::StftConfig cfg;
  std::vector<fx::FeatureMatrix> ms;
  for (std::uint64_t s = 0; s < 4; ++s) {
    ms.push_back(fx::mel_spectrogram(noise_clip(4000, s), cfg, 16, 0.0, 8000.0));
  }
  const auto stats = fx::compute_band_stats(ms);
  REQUIRE(stats.mean.size() == 16);

  fx::BandStats unit{std::vector<double>(16, 0.0), std::vector<double>(16, 1.0)};
  CHECK(fx::normalize_features(ms[0], unit).values.data == ms[0].values.data);
  CHECK(fx::normalize_features(ms[0], stats).config_fingerprint != ms[0].config_fingerprint);

  std::vector<fx::FeatureMatrix> out;
  for (const auto& m : ms) out.push_back(fx::normalize_features(m, stats));
  const auto again = fx::compute_band_stats(out);
  for (std::size_t b = 0; b < 16; ++b) {
    CHECK(std::abs(again.mean[b]) <= 1e-6);
    CHECK(std::abs(again.stddev[b] - 1.0) <= 1e-6);
  }

  // A matrix equal to its own per-band mean maps to zeros.
  fx::FeatureMatrix flat;
  flat.values = fx::Matrix(16, 5);
  for (std::size_t b = 0; b < 16; ++b) {
    for (std::size_t f = 0; f < 5; ++f) flat.values(b, f) = stats.mean[b];
  }
  for (double v : fx::normalize_features(flat, stats).values.data) CHECK(v == 0.0);

  fx::BandStats wrong{std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)};
  CHECK_THROWS_AS(fx::normalize_features(ms[0], wrong), voxid::ShapeError);
}

TEST_CASE("vxf container and index csv") {
  voxid::testing::TempDir dir("vxf");
  fx::ExtractionConfig cfg;
  cfg.kind = fx::FeatureKind::kMfcc;
  AudioClip clip = noise_clip(48000, 9);
  const auto m = fx::extract(clip, cfg);
  CHECK(m.bands() == 13);
  CHECK(m.config_fingerprint == cfg.fingerprint());
  const auto bytes = fx::encode_vxf(m);
  CHECK(bytes.substr(0, 4) == "VXF1");
  CHECK(bytes.size() == 16 + 4 * 13 * 298 + m.config_fingerprint.size());
  fx::write_vxf(dir / "x.vxf", m);
  const auto back = fx::read_vxf(dir / "x.vxf");
  CHECK(back.kind == m.kind);
  CHECK(back.bands() == 13);
  CHECK(back.frames() == 298);
  CHECK(back.config_fingerprint == m.config_fingerprint);
  for (std::size_t i = 0; i < m.values.data.size(); ++i) {
    CHECK(back.values.data[i] == static_cast<double>(static_cast<float>(m.values.data[i])));
  }
  CHECK_THROWS_AS(fx::decode_vxf("VXF2"), voxid::Error);

  std::vector<fx::IndexEntry> idx{{"a/x.vxf", "a"}, {"b/y.vxf", "b"}};
  const auto parsed = fx::parse_index_csv(fx::format_index_csv(idx));
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[1].file == "b/y.vxf");
  CHECK(parsed[1].speaker_id == "b");

  fx::ExtractionConfig other = cfg;
  other.preemphasis = 0.9;
  CHECK(other.fingerprint() != cfg.fingerprint());
}
