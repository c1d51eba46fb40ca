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

#ifndef CD_CANDIDATES_HPP_
#define CD_CANDIDATES_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cd/encoder.hpp"

namespace cd {

// One candidate concept: a short text associated with a class, plus its
// embedding once computed. Ids are unique across the whole pool.
struct ConceptCandidate {
  int id = -1;
  std::string class_label;
  std::string text;
  std::vector<double> embedding;

  bool has_embedding() const { return !embedding.empty(); }
};

// Pool of candidate concepts grouped by class. Within a class, candidates
// are kept sorted by id so iteration order is reproducible.
class CandidatePool {
 public:
  CandidatePool() = default;

  // Takes ownership of candidates; assigns ids 0..n-1 in input order when
  // every id is -1, otherwise requires ids to be unique and non-negative.
  explicit CandidatePool(std::vector<ConceptCandidate> candidates);

  std::size_t size() const { return all_.size(); }
  bool empty() const { return all_.empty(); }

  const std::vector<ConceptCandidate>& all() const { return all_; }
  std::vector<std::string> class_labels() const;

  // Candidates of one class, sorted by id. Throws EmptyClass if none.
  std::vector<const ConceptCandidate*> of_class(const std::string& label) const;

  const ConceptCandidate& by_id(int id) const;

  // Computes embeddings for every candidate that lacks one.
  void ensure_embeddings(const Encoder& encoder);

  // JSONL with fields "id", "class", "text" (embedding omitted).
  void save(const std::filesystem::path& path) const;
  static CandidatePool load(const std::filesystem::path& path);

 private:
  void rebuild_index();

  std::vector<ConceptCandidate> all_;
  std::map<int, std::size_t> index_;
};

}  // namespace cd

#endif  // CD_CANDIDATES_HPP_
