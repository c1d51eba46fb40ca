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

#ifndef CD_SYNTHETIC_HPP_
#define CD_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cd/candidates.hpp"
#include "cd/dataset.hpp"

namespace cd {

// Controls the generated classification fixture: examples are unit vectors
// clustered around orthonormal class means, concepts are noisier vectors
// around the same means, and texts are opaque keys resolved through a
// file-backed embedding table.
struct SyntheticSpec {
  int dim = 64;
  int train_per_class = 100;
  int test_per_class = 50;
  int concepts_per_class = 12;
  double example_noise = 0.1;
  double concept_noise = 0.25;
  // Fraction of test examples whose label is swapped to the next class
  // while the embedding stays put; these become guaranteed bad cases.
  double label_flip_fraction = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> labels = {"circle", "square"};
  // When non-empty, these unit vectors replace the random orthonormal class
  // means (one per label, each of length dim). Lets callers align the fixture
  // with an externally chosen separating direction.
  std::vector<std::vector<double>> forced_means;
};

struct SyntheticData {
  SyntheticSpec spec;
  std::vector<LabeledText> train;
  std::vector<LabeledText> test;
  std::vector<ConceptCandidate> concepts;                 // embedded
  std::map<std::string, std::vector<double>> embeddings;  // text -> unit vector
  std::vector<std::vector<double>> class_means;           // aligned with labels
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

// Writes train.jsonl, test.jsonl, embeddings.jsonl, and stub.jsonl.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace cd

#endif  // CD_SYNTHETIC_HPP_
