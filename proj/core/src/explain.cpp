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

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "cd/decomposer.hpp"
#include "cd/error.hpp"
#include "cd/numerics.hpp"

namespace cd {
namespace {

std::vector<double> pooled_input(const EmbeddedExample& ex) {
  std::vector<double> mean(ex.input.rows(), 0.0);
  for (std::size_t j = 0; j < ex.input.cols(); ++j)
    for (std::size_t i = 0; i < ex.input.rows(); ++i)
      mean[i] += ex.input(i, j);
  for (double& v : mean) v /= static_cast<double>(ex.input.cols());
  return mean;
}

int argmax_class(const std::vector<double>& logits) {
  return static_cast<int>(
      std::distance(logits.begin(), std::max_element(logits.begin(), logits.end())));
}

// Indices into the decomposition (not pool ids) of one class's concepts,
// ranked by key descending with smaller concept id first on ties.
std::vector<std::size_t> ranked_class_concepts(const Decomposition& dec,
                                               const std::vector<double>& keys,
                                               const std::string& label) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dec.concept_ids.size(); ++i)
    if (i < dec.concept_classes.size() && dec.concept_classes[i] == label) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] > keys[b];
    return dec.concept_ids[a] < dec.concept_ids[b];
  });
  return idx;
}

double mean_concept_cosine(const std::vector<std::size_t>& indices, const Decomposition& dec,
                           const CandidatePool& pool, const std::vector<double>& input_vec) {
  if (indices.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i : indices)
    total += cosine(input_vec, pool.by_id(dec.concept_ids[i]).embedding);
  return total / static_cast<double>(indices.size());
}

}  // namespace

nlohmann::json to_json(const ExplanationReport& report) {
  nlohmann::json j;
  j["input_id"] = report.input_id;
  j["predicted_class"] = report.predicted_class;
  j["predicted_label"] = report.predicted_label;
  j["truncated"] = report.truncated;
  j["mean_input_cosine"] = report.mean_input_cosine;
  j["concepts"] = nlohmann::json::array();
  for (const ConceptMention& c : report.concepts) {
    nlohmann::json jc;
    jc["id"] = c.id;
    jc["text"] = c.text;
    jc["key"] = c.key;
    jc["input_cosine"] = c.input_cosine;
    j["concepts"].push_back(jc);
  }
  return j;
}

ExplanationReport explain(const ToyTransformer& model, const Decomposition& dec,
                          const EmbeddedExample& input, const CandidatePool& pool,
                          const std::vector<std::string>& class_labels, int top_k) {
  if (top_k < 1) fail(ErrorKind::kInvalidInput, "top_k must be >= 1");
  if (class_labels.size() != static_cast<std::size_t>(model.config().n_classes))
    fail(ErrorKind::kInvalidInput, "class label list does not match the model");
  if (dec.concept_classes.size() != dec.concept_ids.size())
    fail(ErrorKind::kInvalidInput, "decomposition lacks concept class metadata");

  const AttentionTrace trace = model.forward(dec.prompt(), input.input);
  const int pred = argmax_class(trace.logits);

  ExplanationReport report;
  report.input_id = input.id;
  report.predicted_class = pred;
  report.predicted_label = class_labels[static_cast<std::size_t>(pred)];

  const std::vector<double> keys = concept_keys(dec);
  std::vector<std::size_t> ranked = ranked_class_concepts(dec, keys, report.predicted_label);
  if (ranked.empty())
    fail(ErrorKind::kEmptyClass, "no concepts for class " + report.predicted_label);

  report.truncated = static_cast<std::size_t>(top_k) > ranked.size();
  ranked.resize(std::min<std::size_t>(static_cast<std::size_t>(top_k), ranked.size()));

  const std::vector<double> input_vec = pooled_input(input);
  for (std::size_t i : ranked) {
    ConceptMention m;
    m.id = dec.concept_ids[i];
    m.text = i < dec.concept_texts.size() ? dec.concept_texts[i] : pool.by_id(m.id).text;
    m.key = keys[i];
    m.input_cosine = cosine(input_vec, pool.by_id(m.id).embedding);
    report.concepts.push_back(std::move(m));
  }
  report.mean_input_cosine = mean_concept_cosine(ranked, dec, pool, input_vec);
  return report;
}

nlohmann::json to_json(const AttackReport& report) {
  nlohmann::json j;
  j["cases"] = nlohmann::json::array();
  for (const AttackCase& c : report.cases) {
    nlohmann::json jc;
    jc["input_id"] = c.input_id;
    jc["predicted"] = c.predicted;
    jc["attacked"] = c.attacked;
    jc["pre_similarity"] = c.pre_similarity;
    jc["post_similarity"] = c.post_similarity;
    j["cases"].push_back(jc);
  }
  j["n_cases"] = report.cases.size();
  j["mean_pre"] = report.mean_pre;
  j["mean_post"] = report.mean_post;
  j["delta"] = report.delta;
  return j;
}

std::vector<EmbeddedExample> find_bad_cases(const ToyTransformer& model,
                                            const Decomposition& dec,
                                            const std::vector<EmbeddedExample>& dataset) {
  const Matrix prompt = dec.prompt();
  std::vector<EmbeddedExample> bad;
  for (const EmbeddedExample& ex : dataset) {
    const AttentionTrace trace = model.forward(prompt, ex.input);
    if (argmax_class(trace.logits) != ex.label) bad.push_back(ex);
  }
  return bad;
}

AttackReport causal_attack(const ToyTransformer& model, const Decomposition& dec,
                           const std::vector<EmbeddedExample>& bad_cases,
                           const CandidatePool& pool,
                           const std::vector<std::string>& class_labels,
                           YPrimeRule rule, int top_k) {
  if (top_k < 1) fail(ErrorKind::kInvalidInput, "top_k must be >= 1");
  AttackReport report;
  if (bad_cases.empty()) return report;  // valid empty outcome

  const Matrix prompt = dec.prompt();
  const std::vector<double> keys = concept_keys(dec);

  for (const EmbeddedExample& ex : bad_cases) {
    const AttentionTrace trace = model.forward(prompt, ex.input);
    const std::vector<double> probs = softmax(trace.logits);
    const int pred = argmax_class(trace.logits);

    int attacked = pred;
    switch (rule) {
      case YPrimeRule::kRunnerUp: {
        double best = -1.0;
        for (std::size_t c = 0; c < probs.size(); ++c) {
          if (static_cast<int>(c) == pred) continue;
          if (probs[c] > best) {
            best = probs[c];
            attacked = static_cast<int>(c);
          }
        }
        break;
      }
      case YPrimeRule::kLeastProbable: {
        double worst = 2.0;
        for (std::size_t c = 0; c < probs.size(); ++c) {
          if (static_cast<int>(c) == pred) continue;
          if (probs[c] < worst) {
            worst = probs[c];
            attacked = static_cast<int>(c);
          }
        }
        break;
      }
      case YPrimeRule::kSelf:
        break;
    }

    const std::vector<double> input_vec = [&] {
      std::vector<double> mean(ex.input.rows(), 0.0);
      for (std::size_t j = 0; j < ex.input.cols(); ++j)
        for (std::size_t i = 0; i < ex.input.rows(); ++i) mean[i] += ex.input(i, j);
      for (double& v : mean) v /= static_cast<double>(ex.input.cols());
      return mean;
    }();

    std::vector<std::size_t> pre_ranked =
        ranked_class_concepts(dec, keys, class_labels[static_cast<std::size_t>(pred)]);
    pre_ranked.resize(std::min<std::size_t>(static_cast<std::size_t>(top_k), pre_ranked.size()));

    std::vector<std::size_t> post_ranked =
        ranked_class_concepts(dec, keys, class_labels[static_cast<std::size_t>(attacked)]);
    post_ranked.resize(std::min<std::size_t>(static_cast<std::size_t>(top_k), post_ranked.size()));

    // Swap in the attacked class's concepts: rebuild the prompt from them
    // alone and re-rank the explanation under the rebuilt coefficients.
    if (!post_ranked.empty()) {
      Matrix c_att(dec.c.rows(), post_ranked.size());
      for (std::size_t j = 0; j < post_ranked.size(); ++j)
        c_att.set_col(j, dec.c.col(post_ranked[j]));
      const Matrix q_att = solve_q_least_squares(c_att, prompt);
      std::vector<double> att_keys(post_ranked.size(), 0.0);
      for (std::size_t i = 0; i < q_att.rows(); ++i)
        for (std::size_t j = 0; j < q_att.cols(); ++j) att_keys[i] += q_att(i, j);
      std::vector<std::size_t> order(post_ranked.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (att_keys[a] != att_keys[b]) return att_keys[a] > att_keys[b];
        return dec.concept_ids[post_ranked[a]] < dec.concept_ids[post_ranked[b]];
      });
      std::vector<std::size_t> reordered;
      reordered.reserve(order.size());
      for (std::size_t i : order) reordered.push_back(post_ranked[i]);
      post_ranked = std::move(reordered);
    }

    AttackCase c;
    c.input_id = ex.id;
    c.predicted = pred;
    c.attacked = attacked;
    c.pre_similarity = mean_concept_cosine(pre_ranked, dec, pool, input_vec);
    c.post_similarity = mean_concept_cosine(post_ranked, dec, pool, input_vec);
    report.cases.push_back(std::move(c));
  }

  for (const AttackCase& c : report.cases) {
    report.mean_pre += c.pre_similarity;
    report.mean_post += c.post_similarity;
  }
  report.mean_pre /= static_cast<double>(report.cases.size());
  report.mean_post /= static_cast<double>(report.cases.size());
  report.delta = report.mean_post - report.mean_pre;
  return report;
}

}  // namespace cd
