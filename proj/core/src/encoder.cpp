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

#include "cd/encoder.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cd/error.hpp"
#include "cd/matrix.hpp"
#include "cd/rng.hpp"

namespace cd {
namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

// Token plus intra-token character 3-grams, each hashed into a signed bin.
std::vector<double> hash_features(const std::string& text, int dim, std::uint64_t seed) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  auto add_feature = [&](const std::string& f) {
    const std::uint64_t h = splitmix64(seed ^ fnv1a64(f.data(), f.size()));
    const std::size_t idx = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[idx] += sign;
  };
  for (const std::string& tok : tokenize_lower(text)) {
    add_feature(tok);
    if (tok.size() >= 3)
      for (std::size_t i = 0; i + 3 <= tok.size(); ++i)
        add_feature("#" + tok.substr(i, 3));
  }
  return v;
}

}  // namespace

Encoder Encoder::hash_encoder(int dim, std::uint64_t seed) {
  if (dim <= 0) fail(ErrorKind::kInvalidInput, "encoder dim must be positive");
  Encoder e;
  e.mode_ = EncoderMode::kHash;
  e.dim_ = dim;
  e.seed_ = seed;
  e.name_ = "hash";
  return e;
}

Encoder Encoder::file_backed(const std::filesystem::path& table_path) {
  std::ifstream in(table_path);
  if (!in) fail(ErrorKind::kFileError, "cannot open embedding table " + table_path.string());

  Encoder e;
  e.mode_ = EncoderMode::kFileBacked;
  e.name_ = "file:" + table_path.string();

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("text") || !j.contains("embedding") ||
        !j["embedding"].is_array()) {
      fail(ErrorKind::kParseError, "malformed embedding table line " +
                                       std::to_string(line_no) + " in " +
                                       table_path.string());
    }
    std::vector<double> vec = j["embedding"].get<std::vector<double>>();
    if (e.dim_ == 0) e.dim_ = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != e.dim_)
      fail(ErrorKind::kSchemaError, "inconsistent embedding dimension at line " +
                                        std::to_string(line_no));
    e.table_[j["text"].get<std::string>()] = l2_normalized(vec);
  }
  if (e.table_.empty())
    fail(ErrorKind::kFormatError, "embedding table " + table_path.string() + " is empty");
  return e;
}

Encoder Encoder::custom(int dim, std::string name,
                        std::function<std::vector<double>(const std::string&)> fn) {
  if (dim <= 0) fail(ErrorKind::kInvalidInput, "encoder dim must be positive");
  Encoder e;
  e.mode_ = EncoderMode::kCustom;
  e.dim_ = dim;
  e.name_ = std::move(name);
  e.fn_ = std::move(fn);
  return e;
}

std::vector<double> Encoder::embed(const std::string& text) const {
  switch (mode_) {
    case EncoderMode::kHash: {
      std::vector<double> v = hash_features(text, dim_, seed_);
      if (l2_norm(v) == 0.0) {
        // Texts with no alnum tokens still get a stable direction.
        const std::uint64_t h = splitmix64(seed_ ^ fnv1a64(text.data(), text.size()));
        v[h % static_cast<std::uint64_t>(dim_)] = 1.0;
      }
      return l2_normalized(v);
    }
    case EncoderMode::kFileBacked: {
      auto it = table_.find(text);
      if (it == table_.end())
        fail(ErrorKind::kMissingEmbedding, "no embedding on file for text: " + text);
      return it->second;
    }
    case EncoderMode::kCustom: {
      std::vector<double> v = fn_(text);
      if (static_cast<int>(v.size()) != dim_)
        fail(ErrorKind::kShapeError, "custom encoder returned wrong dimension");
      return l2_normalized(v);
    }
  }
  fail(ErrorKind::kInvalidInput, "uninitialized encoder");
}

std::vector<double> mean_class_embedding(const Encoder& encoder,
                                         const std::vector<LabeledText>& texts,
                                         const std::string& label) {
  std::vector<double> sum(static_cast<std::size_t>(encoder.dim()), 0.0);
  std::size_t n = 0;
  for (const LabeledText& t : texts) {
    if (t.label != label) continue;
    const std::vector<double> v = encoder.embed(t.text);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
    ++n;
  }
  if (n == 0) fail(ErrorKind::kEmptyClass, "no texts with label '" + label + "'");
  for (double& v : sum) v /= static_cast<double>(n);
  return l2_normalized(sum);
}

}  // namespace cd
