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

#ifndef VOXID_CHECKPOINT_HPP_
#define VOXID_CHECKPOINT_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxid/tensor.hpp"

namespace voxid::nn {

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const NamedArray&) const = default;
};

// VXW1 layout (all integers u32 little-endian):
//   "VXW1" count
//   count x { name_len name_bytes rank dim[rank] }
//   float32 blobs in manifest order
std::string encode_vxw(std::span<const NamedArray> arrays);
std::vector<NamedArray> decode_vxw(std::string_view bytes);

void write_vxw(const std::filesystem::path& path, std::span<const NamedArray> arrays);
std::vector<NamedArray> read_vxw(const std::filesystem::path& path);

}  // namespace voxid::nn

#endif  // VOXID_CHECKPOINT_HPP_
