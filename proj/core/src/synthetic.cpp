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

#include "cd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "cd/error.hpp"
#include "cd/matrix.hpp"
#include "cd/rng.hpp"

namespace cd {
namespace {

void validate(const SyntheticSpec& spec) {
  if (spec.dim < 2) fail(ErrorKind::kInvalidInput, "dim must be >= 2");
  if (spec.labels.size() < 2) fail(ErrorKind::kInvalidInput, "need at least 2 classes");
  if (static_cast<std::size_t>(spec.dim) < spec.labels.size())
    fail(ErrorKind::kInvalidInput, "dim must be >= number of classes");
  if (spec.train_per_class < 1 || spec.test_per_class < 0 || spec.concepts_per_class < 1)
    fail(ErrorKind::kInvalidInput, "bad fixture sizes");
  if (spec.label_flip_fraction < 0.0 || spec.label_flip_fraction > 1.0)
    fail(ErrorKind::kInvalidInput, "flip fraction must lie in [0,1]");
  if (!spec.forced_means.empty()) {
    if (spec.forced_means.size() != spec.labels.size())
      fail(ErrorKind::kInvalidInput, "forced_means must supply one mean per label");
    for (const auto& m : spec.forced_means)
      if (m.size() != static_cast<std::size_t>(spec.dim))
        fail(ErrorKind::kShapeError, "forced mean has wrong dimension");
  }
}

std::vector<double> gaussian_vec(int dim, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = rng.gaussian();
  return v;
}

std::vector<double> noisy_point(const std::vector<double>& mean, double noise, Rng& rng) {
  std::vector<double> v = mean;
  for (double& x : v) x += noise * rng.gaussian();
  return l2_normalized(v);
}

std::string index_tag(std::size_t class_idx) {
  std::string tag;
  while (true) {
    tag.insert(tag.begin(), static_cast<char>('a' + class_idx % 26));
    if (class_idx < 26) break;
    class_idx = class_idx / 26 - 1;
  }
  return tag;
}

}  // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  SyntheticData data;
  data.spec = spec;
  Rng rng(spec.seed);

  if (!spec.forced_means.empty()) {
    for (const auto& m : spec.forced_means) data.class_means.push_back(l2_normalized(m));
  } else {
    // Orthonormal class means via Gram-Schmidt.
    for (std::size_t c = 0; c < spec.labels.size(); ++c) {
      std::vector<double> v = gaussian_vec(spec.dim, rng);
      for (const auto& prev : data.class_means) {
        const double proj = dot(v, prev);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * prev[i];
      }
      data.class_means.push_back(l2_normalized(v));
    }
  }

  auto add_example = [&](std::vector<LabeledText>& split, const std::string& prefix,
                         std::size_t class_idx, int idx) {
    char key[64];
    std::snprintf(key, sizeof(key), "%s-%s-%03d", prefix.c_str(),
                  index_tag(class_idx).c_str(), idx);
    LabeledText ex;
    ex.text = key;
    ex.label = spec.labels[class_idx];
    data.embeddings[ex.text] =
        noisy_point(data.class_means[class_idx], spec.example_noise, rng);
    split.push_back(std::move(ex));
  };

  for (std::size_t c = 0; c < spec.labels.size(); ++c)
    for (int i = 0; i < spec.train_per_class; ++i) add_example(data.train, "train", c, i);
  for (std::size_t c = 0; c < spec.labels.size(); ++c)
    for (int i = 0; i < spec.test_per_class; ++i) add_example(data.test, "test", c, i);

  int next_id = 0;
  for (std::size_t c = 0; c < spec.labels.size(); ++c) {
    for (int i = 0; i < spec.concepts_per_class; ++i) {
      ConceptCandidate cand;
      cand.id = next_id++;
      cand.class_label = spec.labels[c];
      cand.text = "trait " + index_tag(c) + std::to_string(i);
      cand.embedding = noisy_point(data.class_means[c], spec.concept_noise, rng);
      data.embeddings[cand.text] = cand.embedding;
      data.concepts.push_back(std::move(cand));
    }
  }

  if (spec.label_flip_fraction > 0.0 && !data.test.empty()) {
    std::vector<std::size_t> order(data.test.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const auto n_flip = static_cast<std::size_t>(
        std::llround(spec.label_flip_fraction * static_cast<double>(data.test.size())));
    for (std::size_t i = 0; i < n_flip && i < order.size(); ++i) {
      LabeledText& ex = data.test[order[i]];
      const auto it = std::find(spec.labels.begin(), spec.labels.end(), ex.label);
      const std::size_t cur = static_cast<std::size_t>(it - spec.labels.begin());
      ex.label = spec.labels[(cur + 1) % spec.labels.size()];
    }
  }

  return data;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  auto write_split = [&](const std::vector<LabeledText>& split, const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) fail(ErrorKind::kFileError, "cannot write " + (dir / name).string());
    for (const LabeledText& ex : split) {
      nlohmann::json j;
      j["text"] = ex.text;
      j["label"] = ex.label;
      out << j.dump() << "\n";
    }
  };
  write_split(data.train, "train.jsonl");
  write_split(data.test, "test.jsonl");

  {
    std::ofstream out(dir / "embeddings.jsonl");
    if (!out) fail(ErrorKind::kFileError, "cannot write embeddings table");
    for (const auto& [text, vec] : data.embeddings) {
      nlohmann::json j;
      j["text"] = text;
      j["embedding"] = vec;
      out << j.dump() << "\n";
    }
  }

  {
    std::ofstream out(dir / "stub.jsonl");
    if (!out) fail(ErrorKind::kFileError, "cannot write stub file");
    for (const ConceptCandidate& c : data.concepts) {
      nlohmann::json j;
      j["class"] = c.class_label;
      j["template_id"] = 0;
      j["text"] = c.text;
      out << j.dump() << "\n";
    }
  }
}

}  // namespace cd
