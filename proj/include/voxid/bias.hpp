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

// Per-group accuracy across speaker gender and accent. Groups follow the
// true speaker, so a misclassified utterance counts against its own group.

#ifndef VOXID_BIAS_HPP_
#define VOXID_BIAS_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxid/audio.hpp"

namespace voxid::bias {

enum class Grouping { kGender, kAccent };

std::string_view to_string(Grouping g);

struct GroupReport {
  Grouping grouping = Grouping::kGender;
  std::map<std::string, double> accuracy;
  std::map<std::string, std::uint64_t> support;
  std::map<std::string, std::uint64_t> correct;
  double disparity = 0.0;  // max - min accuracy
  // Accuracy descending, ties alphabetical.
  std::vector<std::string> ranking;
};

// `class_labels` maps class indices to speaker ids. Throws IndexError on an
// out-of-range label and InvalidArgumentError naming a speaker without
// metadata.
GroupReport group_accuracy(std::span<const std::size_t> truth,
                           std::span<const std::size_t> predicted,
                           std::span<const std::string> class_labels,
                           const audio::MetadataTable& metadata, Grouping grouping);

struct BiasReport {
  GroupReport gender;
  GroupReport accent;
  std::vector<std::string> top_accents;     // up to three best
  std::vector<std::string> bottom_accents;  // up to three worst, worst last
};

BiasReport bias_report(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                       std::span<const std::string> class_labels,
                       const audio::MetadataTable& metadata);

std::string bias_report_json(const BiasReport& report);
// group,accuracy,support rows for one grouping.
std::string group_csv(const GroupReport& report);

}  // namespace voxid::bias

#endif  // VOXID_BIAS_HPP_
