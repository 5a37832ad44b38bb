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

#include "voxid/bias.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"
#include "voxid/errors.hpp"

namespace voxid::bias {

std::string_view to_string(Grouping g) {
  return g == Grouping::kGender ? "gender" : "accent";
}

GroupReport group_accuracy(std::span<const std::size_t> truth,
                           std::span<const std::size_t> predicted,
                           std::span<const std::string> class_labels,
                           const audio::MetadataTable& metadata, Grouping grouping) {
  if (truth.size() != predicted.size()) {
    throw InvalidArgumentError("bias: truth and prediction lengths differ");
  }
  GroupReport r;
  r.grouping = grouping;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= class_labels.size() || predicted[i] >= class_labels.size()) {
      throw IndexError("bias: label out of range at position " + std::to_string(i));
    }
    const std::string& speaker = class_labels[truth[i]];
    const auto it = metadata.find(speaker);
    if (it == metadata.end()) {
      throw InvalidArgumentError("bias: no metadata for speaker '" + speaker + "'");
    }
    const std::string group = grouping == Grouping::kGender
                                  ? std::string(audio::to_string(it->second.gender))
                                  : it->second.accent;
    ++r.support[group];
    r.correct[group] += truth[i] == predicted[i] ? 1 : 0;
  }
  for (const auto& [group, n] : r.support) {
    r.accuracy[group] = static_cast<double>(r.correct[group]) / static_cast<double>(n);
    r.ranking.push_back(group);
  }
  // Map iteration is alphabetical, so a stable sort keeps that as the tie rule.
  std::stable_sort(r.ranking.begin(), r.ranking.end(), [&](const auto& a, const auto& b) {
    return r.accuracy.at(a) > r.accuracy.at(b);
  });
  if (!r.ranking.empty()) {
    r.disparity = r.accuracy.at(r.ranking.front()) - r.accuracy.at(r.ranking.back());
  }
  return r;
}

BiasReport bias_report(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                       std::span<const std::string> class_labels,
                       const audio::MetadataTable& metadata) {
  BiasReport b;
  b.gender = group_accuracy(truth, predicted, class_labels, metadata, Grouping::kGender);
  b.accent = group_accuracy(truth, predicted, class_labels, metadata, Grouping::kAccent);
  const auto& rank = b.accent.ranking;
  const std::size_t n = std::min<std::size_t>(3, rank.size());
  b.top_accents.assign(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(n));
  b.bottom_accents.assign(rank.end() - static_cast<std::ptrdiff_t>(n), rank.end());
  return b;
}

namespace {

nlohmann::ordered_json group_json(const GroupReport& r) {
  nlohmann::ordered_json j;
  j["grouping"] = to_string(r.grouping);
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& g : r.ranking) {
    groups.push_back({{"group", g},
                      {"accuracy", r.accuracy.at(g)},
                      {"support", r.support.at(g)},
                      {"correct", r.correct.at(g)}});
  }
  j["groups"] = groups;
  j["disparity"] = r.disparity;
  j["ranking"] = r.ranking;
  return j;
}

}  // namespace

std::string bias_report_json(const BiasReport& report) {
  nlohmann::ordered_json j;
  j["gender"] = group_json(report.gender);
  j["accent"] = group_json(report.accent);
  j["top_accents"] = report.top_accents;
  j["bottom_accents"] = report.bottom_accents;
  return j.dump(2) + "\n";
}

std::string group_csv(const GroupReport& report) {
  std::string out = "group,accuracy,support\n";
  char buf[64];
  for (const auto& g : report.ranking) {
    std::snprintf(buf, sizeof(buf), "%.6f", report.accuracy.at(g));
    out += g + "," + buf + "," + std::to_string(report.support.at(g)) + "\n";
  }
  return out;
}

}  // namespace voxid::bias
