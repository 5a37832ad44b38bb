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

// Audio ingestion: WAV decode/encode, resampling, pre-emphasis and fixed
// length chunking, plus the speaker metadata table.

#ifndef VOXID_AUDIO_HPP_
#define VOXID_AUDIO_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace voxid::audio {

inline constexpr int kPipelineSampleRate = 16000;
inline constexpr double kDefaultPreemphasis = 0.97;

struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = kPipelineSampleRate;
  std::string speaker_id;
  std::string utterance_id;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Throws InvalidArgumentError if the clip is empty, has a nonpositive rate,
// or carries non-finite / out-of-range amplitudes.
void validate(const AudioClip& clip);

enum class Gender { kFemale, kMale };

std::string_view to_string(Gender g);
Gender parse_gender(std::string_view text);

struct SpeakerMetadata {
  std::string speaker_id;
  Gender gender = Gender::kFemale;
  std::string accent;
};

using MetadataTable = std::map<std::string, SpeakerMetadata>;

// PCM16 or float32 RIFF/WAVE, mono or stereo. Stereo is averaged to mono.
AudioClip load_wav(const std::filesystem::path& path);
AudioClip decode_wav(std::string_view bytes);

// Always writes mono PCM16. Samples are clamped to [-1, 1) before rounding.
std::string encode_wav_pcm16(const AudioClip& clip);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

AudioClip resample(const AudioClip& clip, int target_rate_hz);

std::vector<AudioClip> chunk_fixed(const AudioClip& clip, double chunk_seconds);

AudioClip preemphasis(const AudioClip& clip, double alpha);

// CSV with header `speaker_id,gender,accent`.
MetadataTable read_metadata_csv(const std::filesystem::path& path);
MetadataTable parse_metadata_csv(std::string_view text);
std::string format_metadata_csv(const MetadataTable& table);

}  // namespace voxid::audio

#endif  // VOXID_AUDIO_HPP_
