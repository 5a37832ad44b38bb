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

// Source-filter speaker synthesis: a jittered harmonic source shaped by
// three formant resonators. Gender follows the pitch band and accent
// follows the formant template, so both are meaningful bias groups.

#ifndef VOXID_SYNTH_HPP_
#define VOXID_SYNTH_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxid/audio.hpp"

namespace voxid::synth {

inline constexpr double kMinF0Hz = 80.0;
inline constexpr double kMaxF0Hz = 300.0;
inline constexpr double kMinF0SeparationHz = 5.0;
inline constexpr double kFemaleF0ThresholdHz = 165.0;
inline constexpr double kPeakLevel = 0.9;

struct SpeakerProfile {
  std::string speaker_id;
  double f0_hz = 120.0;
  std::array<double, 3> formants_hz{500.0, 1500.0, 2500.0};
  double jitter = 0.0;  // relative f0 wobble
  double noise_level = 0.0;
  audio::Gender gender = audio::Gender::kMale;
  std::string accent;
};

// Throws InvalidArgumentError when n cannot fit the pitch band at the
// minimum separation.
std::vector<SpeakerProfile> generate_profiles(std::size_t n_speakers,
                                              std::size_t n_accent_clusters, std::uint64_t seed);

audio::AudioClip synthesize_utterance(const SpeakerProfile& profile, double duration_s,
                                      std::uint64_t seed,
                                      int sample_rate_hz = audio::kPipelineSampleRate);

struct CorpusLayout {
  std::vector<std::filesystem::path> wav_files;  // relative to the corpus root
  std::filesystem::path metadata;
};

// Writes <out>/<speaker_id>/<utterance_id>.wav and <out>/metadata.csv.
CorpusLayout generate_corpus(const std::vector<SpeakerProfile>& profiles,
                             std::size_t utterances_per_speaker, double duration_s,
                             const std::filesystem::path& out_dir, std::uint64_t seed,
                             int threads = 1);

}  // namespace voxid::synth

#endif  // VOXID_SYNTH_HPP_
