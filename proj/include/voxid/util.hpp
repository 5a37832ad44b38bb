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

#ifndef VOXID_UTIL_HPP_
#define VOXID_UTIL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace voxid {

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Mixes a master seed with a counter into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter);

// Fisher-Yates with a fixed reduction so the permutation depends only on the
// engine output, not on the standard library's distribution implementation.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

// Uniform double in [0, 1) from the top 53 bits of the engine output.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

// Little-endian scalar codecs used by the binary container formats.
void put_u32(std::string& out, std::uint32_t value);
void put_f32(std::string& out, float value);
std::uint32_t get_u32(std::string_view in, std::size_t offset);
float get_f32(std::string_view in, std::size_t offset);

// Runs fn(i) for i in [0, count) on up to `threads` workers. Exceptions from
// workers are rethrown on the caller (first one wins).
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

std::string utc_timestamp();

// Splits one CSV line on commas. Fields are taken verbatim (no quoting).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace voxid

#endif  // VOXID_UTIL_HPP_
