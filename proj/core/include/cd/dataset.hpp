// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CONCEPTDECOMP_CORE_DATASET_HPP_
#define CONCEPTDECOMP_CORE_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cd {

struct LabeledText {
  std::string text;
  std::string label;
};

// Reads a UTF-8 JSON-lines file with fields "text" and "label". Order is
// preserved. Labels are validated against `labels`; an unknown label is a
// SchemaError, a malformed line a ParseError naming the line number.
std::vector<LabeledText> load_dataset(const std::filesystem::path& path,
                                      const std::vector<std::string>& labels);

// Deterministic per-class subsample: at most `shots_per_class` examples of
// each label, chosen by a seeded shuffle of each class's indices. A
// non-positive count means the full set.
std::vector<LabeledText> stratified_shots(const std::vector<LabeledText>& data,
                                          const std::vector<std::string>& labels,
                                          int shots_per_class, std::uint64_t seed);

}  // namespace cd

#endif  // CONCEPTDECOMP_CORE_DATASET_HPP_
