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

#include "voxid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <random>

#include "voxid/errors.hpp"
#include "voxid/util.hpp"

namespace voxid::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Vowel-like formant centres, one per accent cluster.
constexpr std::array<std::array<double, 3>, 8> kFormantTemplates{{
    {730.0, 1090.0, 2440.0},
    {270.0, 2290.0, 3010.0},
    {530.0, 1840.0, 2480.0},
    {300.0, 870.0, 2240.0},
    {660.0, 1720.0, 2410.0},
    {490.0, 1350.0, 1690.0},
    {440.0, 1020.0, 2240.0},
    {400.0, 2000.0, 2550.0},
}};
constexpr std::array<double, 3> kFormantBandwidthHz{90.0, 110.0, 150.0};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller on the library-independent uniform draw.
double gaussian(std::mt19937_64& rng) {
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::string accent_label(std::size_t cluster) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "accent-%c", static_cast<char>('a' + cluster % 26));
  return cluster < 26 ? buf : std::string(buf) + std::to_string(cluster / 26);
}

// Unity-DC-gain two-pole resonator, applied in place.
void resonate(std::vector<double>& x, double centre_hz, double bandwidth_hz, int rate) {
  const double r = std::exp(-std::numbers::pi * bandwidth_hz / rate);
  const double b = 2.0 * r * std::cos(kTwoPi * centre_hz / rate);
  const double c = -r * r;
  const double a = 1.0 - b - c;
  double y1 = 0.0;
  double y2 = 0.0;
  for (double& v : x) {
    const double y = a * v + b * y1 + c * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

std::vector<SpeakerProfile> generate_profiles(std::size_t n_speakers,
                                              std::size_t n_accent_clusters, std::uint64_t seed) {
  if (n_speakers < 2) throw InvalidArgumentError("need at least 2 speakers");
  if (n_accent_clusters < 1) throw InvalidArgumentError("need at least 1 accent cluster");
  const auto capacity =
      static_cast<std::size_t>((kMaxF0Hz - kMinF0Hz) / kMinF0SeparationHz) + 1;
  if (n_speakers > capacity) {
    throw InvalidArgumentError("cannot place " + std::to_string(n_speakers) +
                               " speakers at " + std::to_string(kMinF0SeparationHz) +
                               " Hz pitch separation; use at most " + std::to_string(capacity));
  }
  std::mt19937_64 rng(seed);
  std::vector<double> f0s;
  // Rejection sampling first; an evenly spaced grid is the fallback for dense
  // requests where rejection stalls.
  for (int attempt = 0; attempt < 10000 && f0s.size() < n_speakers; ++attempt) {
    const double f = uniform(rng, kMinF0Hz, kMaxF0Hz);
    const bool clear = std::all_of(f0s.begin(), f0s.end(), [f](double g) {
      return std::abs(f - g) >= kMinF0SeparationHz;
    });
    if (clear) f0s.push_back(f);
  }
  if (f0s.size() < n_speakers) {
    f0s.clear();
    const double step = (kMaxF0Hz - kMinF0Hz) / static_cast<double>(n_speakers - 1);
    for (std::size_t i = 0; i < n_speakers; ++i) f0s.push_back(kMinF0Hz + step * i);
    seeded_shuffle(f0s, rng);
  }

  const int width = std::max(2, static_cast<int>(std::to_string(n_speakers).size()));
  std::vector<SpeakerProfile> out;
  for (std::size_t i = 0; i < n_speakers; ++i) {
    SpeakerProfile p;
    char id[32];
    std::snprintf(id, sizeof(id), "spk%0*zu", width, i + 1);
    p.speaker_id = id;
    p.f0_hz = f0s[i];
    const std::size_t cluster = i % n_accent_clusters;
    const auto& tmpl = kFormantTemplates[cluster % kFormantTemplates.size()];
    // Templates past the table wrap with a per-cluster shift.
    const double shift = 1.0 + 0.04 * static_cast<double>(cluster / kFormantTemplates.size());
    for (std::size_t k = 0; k < 3; ++k) {
      p.formants_hz[k] = tmpl[k] * shift * uniform(rng, 0.93, 1.07);
    }
    std::sort(p.formants_hz.begin(), p.formants_hz.end());
    for (std::size_t k = 1; k < 3; ++k) {
      p.formants_hz[k] = std::max(p.formants_hz[k], p.formants_hz[k - 1] + 50.0);
    }
    p.jitter = uniform(rng, 0.002, 0.01);
    p.noise_level = uniform(rng, 0.01, 0.05);
    p.gender = p.f0_hz >= kFemaleF0ThresholdHz ? audio::Gender::kFemale : audio::Gender::kMale;
    p.accent = accent_label(cluster);
    out.push_back(std::move(p));
  }
  return out;
}

audio::AudioClip synthesize_utterance(const SpeakerProfile& profile, double duration_s,
                                      std::uint64_t seed, int sample_rate_hz) {
  if (!(duration_s > 0.0)) throw InvalidArgumentError("duration must be positive");
  if (sample_rate_hz <= 0) throw InvalidArgumentError("sample rate must be positive");
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  const double nyquist = 0.5 * sample_rate_hz;
  const double f0 = profile.f0_hz;
  const auto harmonics = static_cast<std::size_t>(std::max(1.0, std::floor(0.9 * nyquist / f0)));

  // Harmonic k is Im(z^k * offset_k) with z = exp(i * phase); powers of z
  // come from repeated multiplication instead of one sin() per harmonic.
  std::vector<std::complex<double>> offset(harmonics);
  for (std::size_t k = 0; k < harmonics; ++k) {
    offset[k] = std::polar(1.0 / static_cast<double>(k + 1), uniform(rng, 0.0, kTwoPi));
  }
  const double wobble_hz = uniform(rng, 3.0, 6.0);
  const double wobble_phase = uniform(rng, 0.0, kTwoPi);

  std::vector<double> x(n, 0.0);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    const double inst =
        f0 * (1.0 + profile.jitter * std::sin(kTwoPi * wobble_hz * t + wobble_phase));
    const auto z = std::polar(1.0, phase);
    const auto active = std::min(harmonics, static_cast<std::size_t>(nyquist / inst));
    std::complex<double> zk = z;
    double s = 0.0;
    for (std::size_t k = 0; k < active; ++k) {
      s += (zk * offset[k]).imag();
      zk *= z;
    }
    x[i] = s;
    phase = std::fmod(phase + kTwoPi * inst / sample_rate_hz, kTwoPi);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    if (profile.formants_hz[k] < nyquist) {
      resonate(x, profile.formants_hz[k], kFormantBandwidthHz[k], sample_rate_hz);
    }
  }

  double peak = 0.0;
  for (const double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : x) v /= peak;
  }
  if (profile.noise_level > 0.0) {
    for (double& v : x) v += profile.noise_level * gaussian(rng);
  }
  peak = 0.0;
  for (const double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : x) v *= kPeakLevel / peak;
  }

  audio::AudioClip clip;
  clip.samples = std::move(x);
  clip.sample_rate_hz = sample_rate_hz;
  clip.speaker_id = profile.speaker_id;
  return clip;
}

CorpusLayout generate_corpus(const std::vector<SpeakerProfile>& profiles,
                             std::size_t utterances_per_speaker, double duration_s,
                             const std::filesystem::path& out_dir, std::uint64_t seed,
                             int threads) {
  if (profiles.empty()) throw InvalidArgumentError("no speaker profiles");
  if (utterances_per_speaker == 0) throw InvalidArgumentError("need at least 1 utterance");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  CorpusLayout layout;
  audio::MetadataTable meta;
  for (const auto& p : profiles) {
    std::filesystem::create_directories(out_dir / p.speaker_id, ec);
    if (ec) throw IoError("cannot create " + (out_dir / p.speaker_id).string() + ": " + ec.message());
    meta[p.speaker_id] = {p.speaker_id, p.gender, p.accent};
    for (std::size_t u = 0; u < utterances_per_speaker; ++u) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_u%03zu.wav", p.speaker_id.c_str(), u + 1);
      layout.wav_files.push_back(std::filesystem::path(p.speaker_id) / name);
    }
  }

  parallel_for(layout.wav_files.size(), threads, [&](std::size_t i) {
    const auto& p = profiles[i / utterances_per_speaker];
    const std::size_t u = i % utterances_per_speaker;
    auto clip = synthesize_utterance(p, duration_s, derive_seed(derive_seed(seed, fnv1a64(p.speaker_id)), u));
    clip.utterance_id = layout.wav_files[i].stem().string();
    audio::write_wav(out_dir / layout.wav_files[i], clip);
  });

  layout.metadata = out_dir / "metadata.csv";
  write_file_atomic(layout.metadata, audio::format_metadata_csv(meta));
  return layout;
}

}  // namespace voxid::synth
