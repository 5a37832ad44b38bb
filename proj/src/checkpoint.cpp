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

#include "voxid/checkpoint.hpp"

#include "voxid/errors.hpp"
#include "voxid/util.hpp"

namespace voxid::nn {

std::string encode_vxw(std::span<const NamedArray> arrays) {
  std::string out = "VXW1";
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (shape_size(a.shape) != a.values.size()) {
      throw ShapeError("checkpoint entry '" + a.name + "' has " +
                       std::to_string(a.values.size()) + " values for shape " +
                       shape_string(a.shape));
    }
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& a : arrays) {
    for (float v : a.values) put_f32(out, v);
  }
  return out;
}

std::vector<NamedArray> decode_vxw(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != "VXW1") {
    throw DecodeError("not a VXW1 checkpoint (bad magic)");
  }
  const std::uint32_t count = get_u32(bytes, 4);
  std::size_t pos = 8;
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    const std::uint32_t name_len = get_u32(bytes, pos);
    pos += 4;
    if (pos + name_len > bytes.size()) throw DecodeError("VXW1: truncated manifest");
    a.name = std::string(bytes.substr(pos, name_len));
    pos += name_len;
    const std::uint32_t rank = get_u32(bytes, pos);
    pos += 4;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.shape.push_back(get_u32(bytes, pos));
      pos += 4;
    }
    arrays.push_back(std::move(a));
  }
  for (auto& a : arrays) {
    const std::size_t n = shape_size(a.shape);
    if (pos + 4 * n > bytes.size()) {
      throw DecodeError("VXW1: truncated data for '" + a.name + "'");
    }
    a.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) a.values[i] = get_f32(bytes, pos + 4 * i);
    pos += 4 * n;
  }
  if (pos != bytes.size()) throw DecodeError("VXW1: trailing bytes after last blob");
  return arrays;
}

void write_vxw(const std::filesystem::path& path, std::span<const NamedArray> arrays) {
  write_file_atomic(path, encode_vxw(arrays));
}

std::vector<NamedArray> read_vxw(const std::filesystem::path& path) {
  try {
    return decode_vxw(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

}  // namespace voxid::nn
