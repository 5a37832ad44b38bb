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

#ifndef VOXID_ERRORS_HPP_
#define VOXID_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace voxid {

// Error categories. The numeric values are shared with the C API status
// codes in voxid.h, so keep the two lists in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIo = 2,
  kDecode = 3,
  kUnsupported = 4,
  kShape = 5,
  kConfig = 6,
  kIndex = 7,
  kState = 8,
  kNumeric = 9,
  kBuild = 10,
  kParse = 11,
  kInternal = 12,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define VOXID_DEFINE_ERROR(Name, Code)                              \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(Code, what) {}   \
  }

VOXID_DEFINE_ERROR(InvalidArgumentError, ErrorCode::kInvalidArgument);
VOXID_DEFINE_ERROR(IoError, ErrorCode::kIo);
VOXID_DEFINE_ERROR(DecodeError, ErrorCode::kDecode);
VOXID_DEFINE_ERROR(UnsupportedFormatError, ErrorCode::kUnsupported);
VOXID_DEFINE_ERROR(ShapeError, ErrorCode::kShape);
VOXID_DEFINE_ERROR(ConfigError, ErrorCode::kConfig);
VOXID_DEFINE_ERROR(IndexError, ErrorCode::kIndex);
VOXID_DEFINE_ERROR(StateError, ErrorCode::kState);
VOXID_DEFINE_ERROR(NumericError, ErrorCode::kNumeric);
VOXID_DEFINE_ERROR(BuildError, ErrorCode::kBuild);
VOXID_DEFINE_ERROR(ParseError, ErrorCode::kParse);

#undef VOXID_DEFINE_ERROR

}  // namespace voxid

#endif  // VOXID_ERRORS_HPP_
