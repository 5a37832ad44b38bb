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

#ifndef VOXID_DATASET_HPP_
#define VOXID_DATASET_HPP_

#include <cstddef>
#include <vector>

#include "voxid/features.hpp"

namespace voxid {

// Labeled feature matrices; labels index the model's class list.
struct Dataset {
  std::vector<features::FeatureMatrix> features;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  void add(features::FeatureMatrix m, std::size_t label) {
    features.push_back(std::move(m));
    labels.push_back(label);
  }
};

}  // namespace voxid

#endif  // VOXID_DATASET_HPP_
