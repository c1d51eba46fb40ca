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

#ifndef CONCEPTDECOMP_CORE_ENCODER_HPP_
#define CONCEPTDECOMP_CORE_ENCODER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cd/dataset.hpp"

namespace cd {

enum class EncoderMode { kHash, kFileBacked, kCustom };

// Text encoder E(.). Every mode is deterministic: the same text always maps
// to the same unit-norm vector of dimension dim().
//
//  - hash: seeded token/char-3-gram feature hashing. Needs no data files.
//  - file_backed: exact lookup from a JSON-lines table {"text", "embedding"};
//    an unknown text is a MissingEmbedding error, never a silent fallback.
//  - custom: caller-supplied function (e.g. toy-transformer pooling).
class Encoder {
 public:
  static Encoder hash_encoder(int dim, std::uint64_t seed);
  static Encoder file_backed(const std::filesystem::path& table_path);
  static Encoder custom(int dim, std::string name,
                        std::function<std::vector<double>(const std::string&)> fn);

  int dim() const { return dim_; }
  EncoderMode mode() const { return mode_; }
  const std::string& name() const { return name_; }

  // Unit-norm embedding of `text`.
  std::vector<double> embed(const std::string& text) const;

 private:
  Encoder() = default;

  EncoderMode mode_ = EncoderMode::kHash;
  int dim_ = 0;
  std::uint64_t seed_ = 0;
  std::string name_;
  std::map<std::string, std::vector<double>> table_;
  std::function<std::vector<double>(const std::string&)> fn_;
};

// Mean of the embeddings of the texts labeled `label`, then L2-normalized.
// Empty class -> EmptyClass; zero mean -> DegenerateInput.
std::vector<double> mean_class_embedding(const Encoder& encoder,
                                         const std::vector<LabeledText>& texts,
                                         const std::string& label);

}  // namespace cd

#endif  // CONCEPTDECOMP_CORE_ENCODER_HPP_
