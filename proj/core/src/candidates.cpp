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

#include "cd/candidates.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "cd/error.hpp"

namespace cd {

CandidatePool::CandidatePool(std::vector<ConceptCandidate> candidates)
    : all_(std::move(candidates)) {
  bool all_unset = true;
  for (const ConceptCandidate& c : all_)
    if (c.id != -1) all_unset = false;
  if (all_unset) {
    for (std::size_t i = 0; i < all_.size(); ++i)
      all_[i].id = static_cast<int>(i);
  }
  std::sort(all_.begin(), all_.end(),
            [](const ConceptCandidate& a, const ConceptCandidate& b) { return a.id < b.id; });
  rebuild_index();
}

void CandidatePool::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < all_.size(); ++i) {
    const ConceptCandidate& c = all_[i];
    if (c.id < 0) fail(ErrorKind::kInvalidInput, "candidate id must be non-negative");
    if (!index_.emplace(c.id, i).second)
      fail(ErrorKind::kInvalidInput, "duplicate candidate id " + std::to_string(c.id));
  }
}

std::vector<std::string> CandidatePool::class_labels() const {
  std::vector<std::string> labels;
  for (const ConceptCandidate& c : all_)
    if (std::find(labels.begin(), labels.end(), c.class_label) == labels.end())
      labels.push_back(c.class_label);
  std::sort(labels.begin(), labels.end());
  return labels;
}

std::vector<const ConceptCandidate*> CandidatePool::of_class(const std::string& label) const {
  std::vector<const ConceptCandidate*> out;
  for (const ConceptCandidate& c : all_)
    if (c.class_label == label) out.push_back(&c);
  if (out.empty()) fail(ErrorKind::kEmptyClass, "no candidates for class '" + label + "'");
  return out;
}

const ConceptCandidate& CandidatePool::by_id(int id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    fail(ErrorKind::kInvalidInput, "unknown candidate id " + std::to_string(id));
  return all_[it->second];
}

void CandidatePool::ensure_embeddings(const Encoder& encoder) {
  for (ConceptCandidate& c : all_)
    if (!c.has_embedding()) c.embedding = encoder.embed(c.text);
}

void CandidatePool::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kFileError, "cannot write " + path.string());
  for (const ConceptCandidate& c : all_) {
    nlohmann::json j;
    j["id"] = c.id;
    j["class"] = c.class_label;
    j["text"] = c.text;
    out << j.dump() << "\n";
  }
  if (!out) fail(ErrorKind::kFileError, "write failed for " + path.string());
}

CandidatePool CandidatePool::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kFileError, "cannot open " + path.string());
  std::vector<ConceptCandidate> cands;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      fail(ErrorKind::kParseError,
           "bad JSON at line " + std::to_string(line_no) + " in " + path.string());
    if (!j.contains("id") || !j.contains("class") || !j.contains("text"))
      fail(ErrorKind::kSchemaError,
           "candidate line " + std::to_string(line_no) + " missing id/class/text");
    ConceptCandidate c;
    c.id = j["id"].get<int>();
    c.class_label = j["class"].get<std::string>();
    c.text = j["text"].get<std::string>();
    cands.push_back(std::move(c));
  }
  return CandidatePool(std::move(cands));
}

}  // namespace cd
