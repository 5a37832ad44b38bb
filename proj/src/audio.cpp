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

#include "voxid/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>

#include "voxid/errors.hpp"
#include "voxid/util.hpp"

namespace voxid::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t get_u16(std::string_view in, std::size_t offset) {
  if (offset + 2 > in.size()) {
    throw DecodeError("truncated data at byte offset " + std::to_string(offset));
  }
  return static_cast<std::uint16_t>(
      static_cast<unsigned char>(in[offset]) |
      (static_cast<unsigned char>(in[offset + 1]) << 8));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

}  // namespace

void validate(const AudioClip& clip) {
  if (clip.sample_rate_hz <= 0) {
    throw InvalidArgumentError("sample rate must be positive, got " +
                               std::to_string(clip.sample_rate_hz));
  }
  if (clip.samples.empty()) {
    throw InvalidArgumentError("audio clip '" + clip.utterance_id +
                               "' has no samples");
  }
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const double s = clip.samples[i];
    if (!std::isfinite(s) || s < -1.0 || s > 1.0) {
      throw InvalidArgumentError("sample " + std::to_string(i) +
                                 " out of range [-1, 1] in clip '" +
                                 clip.utterance_id + "'");
    }
  }
}

std::string_view to_string(Gender g) {
  return g == Gender::kFemale ? "female" : "male";
}

Gender parse_gender(std::string_view text) {
  if (text == "female") return Gender::kFemale;
  if (text == "male") return Gender::kMale;
  throw ParseError("unknown gender '" + std::string(text) +
                   "' (expected female or male)");
}

AudioClip decode_wav(std::string_view bytes) {
  if (bytes.size() < 12) throw DecodeError("RIFF header: file too short");
  if (bytes.substr(0, 4) != "RIFF") {
    throw DecodeError("RIFF header: bad magic '" +
                      std::string(bytes.substr(0, 4)) + "'");
  }
  if (bytes.substr(8, 4) != "WAVE") {
    throw DecodeError("RIFF header: form type is not WAVE");
  }

  std::optional<FmtChunk> fmt;
  std::optional<std::string_view> data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::uint32_t size = get_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw DecodeError("chunk '" + std::string(id) + "': declared size " +
                        std::to_string(size) + " exceeds file length");
    }
    if (id == "fmt ") {
      if (size < 16) throw DecodeError("chunk 'fmt ': too short");
      FmtChunk f;
      f.format = get_u16(bytes, body);
      f.channels = get_u16(bytes, body + 2);
      f.sample_rate = get_u32(bytes, body + 4);
      f.bits_per_sample = get_u16(bytes, body + 14);
      if (f.format == kFormatExtensible && size >= 26) {
        f.format = get_u16(bytes, body + 24);
      }
      fmt = f;
    } else if (id == "data") {
      data = bytes.substr(body, size);
    }
    pos = body + size + (size & 1);
  }
  if (!fmt) throw DecodeError("chunk 'fmt ': missing");
  if (!data) throw DecodeError("chunk 'data': missing");

  const bool pcm16 = fmt->format == kFormatPcm && fmt->bits_per_sample == 16;
  const bool f32 = fmt->format == kFormatFloat && fmt->bits_per_sample == 32;
  if (!pcm16 && !f32) {
    throw UnsupportedFormatError(
        "unsupported WAV encoding (format " + std::to_string(fmt->format) +
        ", " + std::to_string(fmt->bits_per_sample) +
        " bits); supported: PCM 16-bit, IEEE float 32-bit");
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    throw UnsupportedFormatError("unsupported channel count " +
                                 std::to_string(fmt->channels) +
                                 "; supported: 1 or 2");
  }
  if (fmt->sample_rate == 0) throw DecodeError("chunk 'fmt ': sample rate 0");

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  const std::size_t frames = data->size() / frame_bytes;

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(fmt->sample_rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt->channels; ++c) {
      const std::size_t off = i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        const auto raw = static_cast<std::int16_t>(get_u16(*data, off));
        acc += static_cast<double>(raw) / 32768.0;
      } else {
        acc += static_cast<double>(get_f32(*data, off));
      }
    }
    clip.samples[i] = acc / fmt->channels;
  }
  return clip;
}

AudioClip load_wav(const std::filesystem::path& path) {
  AudioClip clip;
  try {
    clip = decode_wav(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  }
  clip.utterance_id = path.stem().string();
  return clip;
}

std::string encode_wav_pcm16(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double scaled = std::round(s * 32768.0);
    const double clamped = std::clamp(scaled, -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(clamped)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  write_file_atomic(path, encode_wav_pcm16(clip));
}

AudioClip resample(const AudioClip& clip, int target_rate_hz) {
  if (target_rate_hz <= 0) {
    throw InvalidArgumentError("target rate must be positive");
  }
  if (clip.sample_rate_hz <= 0 || clip.samples.empty()) {
    throw InvalidArgumentError("cannot resample an invalid clip");
  }
  if (target_rate_hz == clip.sample_rate_hz) return clip;

  const std::size_t n = clip.samples.size();
  const double ratio = static_cast<double>(clip.sample_rate_hz) / target_rate_hz;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * target_rate_hz / clip.sample_rate_hz));

  AudioClip out = clip;
  out.sample_rate_hz = target_rate_hz;
  out.samples.assign(out_len, 0.0);
  for (std::size_t j = 0; j < out_len; ++j) {
    const double pos = static_cast<double>(j) * ratio;
    const auto left = static_cast<std::size_t>(pos);
    if (left + 1 >= n) {
      out.samples[j] = clip.samples[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(left);
    out.samples[j] = clip.samples[left] * (1.0 - frac) + clip.samples[left + 1] * frac;
  }
  return out;
}

std::vector<AudioClip> chunk_fixed(const AudioClip& clip, double chunk_seconds) {
  if (!(chunk_seconds > 0.0)) {
    throw InvalidArgumentError("chunk length must be positive");
  }
  const auto chunk_len = static_cast<std::size_t>(
      std::llround(chunk_seconds * clip.sample_rate_hz));
  std::vector<AudioClip> chunks;
  if (chunk_len == 0) return chunks;
  const std::size_t count = clip.samples.size() / chunk_len;
  chunks.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    AudioClip chunk;
    chunk.sample_rate_hz = clip.sample_rate_hz;
    chunk.speaker_id = clip.speaker_id;
    chunk.utterance_id = clip.utterance_id + "_" + std::to_string(c);
    const auto begin = clip.samples.begin() + static_cast<std::ptrdiff_t>(c * chunk_len);
    chunk.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(chunk_len));
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

AudioClip preemphasis(const AudioClip& clip, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw InvalidArgumentError("pre-emphasis coefficient must be in [0, 1)");
  }
  AudioClip out = clip;
  for (std::size_t i = 1; i < clip.samples.size(); ++i) {
    out.samples[i] = clip.samples[i] - alpha * clip.samples[i - 1];
  }
  return out;
}

MetadataTable parse_metadata_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("metadata CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != "speaker_id,gender,accent") {
    throw ParseError("metadata CSV header must be 'speaker_id,gender,accent', got '" +
                     line + "'");
  }
  MetadataTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw ParseError("metadata CSV line " + std::to_string(line_no) +
                       ": expected 3 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError("metadata CSV line " + std::to_string(line_no) +
                       ": empty field");
    }
    SpeakerMetadata m{fields[0], parse_gender(fields[1]), fields[2]};
    if (!table.emplace(m.speaker_id, m).second) {
      throw ParseError("metadata CSV line " + std::to_string(line_no) +
                       ": duplicate speaker_id '" + m.speaker_id + "'");
    }
  }
  return table;
}

MetadataTable read_metadata_csv(const std::filesystem::path& path) {
  return parse_metadata_csv(read_file(path));
}

std::string format_metadata_csv(const MetadataTable& table) {
  std::string out = "speaker_id,gender,accent\n";
  for (const auto& [id, m] : table) {
    out += id;
    out += ',';
    out += to_string(m.gender);
    out += ',';
    out += m.accent;
    out += '\n';
  }
  return out;
}

}  // namespace voxid::audio
