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

#include "cd/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "cd/error.hpp"
#include "cd/rng.hpp"

namespace cd {

std::vector<LabeledText> load_dataset(const std::filesystem::path& path,
                                      const std::vector<std::string>& labels) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kFileError, "cannot open dataset " + path.string());

  const std::unordered_set<std::string> label_set(labels.begin(), labels.end());
  std::vector<LabeledText> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
        !j.contains("label") || !j["text"].is_string() || !j["label"].is_string()) {
      fail(ErrorKind::kParseError,
           "malformed dataset line " + std::to_string(line_no) + " in " + path.string());
    }
    LabeledText rec{j["text"].get<std::string>(), j["label"].get<std::string>()};
    if (rec.text.empty())
      fail(ErrorKind::kParseError,
           "empty text at line " + std::to_string(line_no) + " in " + path.string());
    if (!label_set.empty() && label_set.count(rec.label) == 0)
      fail(ErrorKind::kSchemaError,
           "unknown label '" + rec.label + "' at line " + std::to_string(line_no));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<LabeledText> stratified_shots(const std::vector<LabeledText>& data,
                                          const std::vector<std::string>& labels,
                                          int shots_per_class, std::uint64_t seed) {
  if (shots_per_class <= 0) return data;

  std::vector<std::size_t> keep;
  for (const std::string& label : labels) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data[i].label == label) idx.push_back(i);
    Rng rng(splitmix64(seed ^ fnv1a64(label.data(), label.size())));
    rng.shuffle(idx);
    const std::size_t n = std::min<std::size_t>(idx.size(),
                                                static_cast<std::size_t>(shots_per_class));
    keep.insert(keep.end(), idx.begin(), idx.begin() + n);
  }
  std::sort(keep.begin(), keep.end());  // preserve original order

  std::vector<LabeledText> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(data[i]);
  return out;
}

}  // namespace cd
