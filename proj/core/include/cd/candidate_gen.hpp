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

#ifndef CD_CANDIDATE_GEN_HPP_
#define CD_CANDIDATE_GEN_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "cd/candidates.hpp"

namespace cd {

// A prompt template with exactly one "[CLASS NAME]" placeholder.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string pattern);

  const std::string& pattern() const { return pattern_; }
  std::string render(const std::string& class_name) const;

 private:
  std::string pattern_;
};

// The default description-eliciting templates.
std::vector<PromptTemplate> default_templates();

struct RenderedPrompt {
  std::string class_label;
  int template_id = 0;
  std::string text;
};

// Cross product of templates and classes, classes outermost.
std::vector<RenderedPrompt> render_prompts(const std::vector<PromptTemplate>& templates,
                                           const std::vector<std::string>& class_labels);

// Removes any occurrence of a class label (or its naive plural) from the
// candidate texts, case-insensitively on word boundaries. Candidates whose
// text becomes empty are dropped; relative order is preserved.
std::vector<ConceptCandidate> filter_leakage(std::vector<ConceptCandidate> candidates,
                                             const std::vector<std::string>& class_labels);

enum class GeneratorKind {
  kStub,  // replays texts recorded in a JSONL file
  kHttp,  // queries an external text generator service
};

struct GeneratorOptions {
  GeneratorKind kind = GeneratorKind::kStub;
  std::filesystem::path stub_path;
  int samples_per_prompt = 50;
  std::string instruction = "Do not mention the class label itself in your answer.";
  int max_retries = 3;
};

// Produces candidate texts for each rendered prompt. The stub backend reads
// JSONL records {"class","template_id","text"}; the HTTP backend posts
// {"prompt","n","instruction"} to the endpoint in CD_GEN_URL (bearer token
// from CD_GEN_TOKEN when set) and expects {"texts":[...]}.
class GeneratorClient {
 public:
  explicit GeneratorClient(GeneratorOptions options);

  // One candidate per generated text, ids assigned 0..n-1 in generation
  // order (classes in input order, templates in order, texts in order).
  std::vector<ConceptCandidate> generate(const std::vector<RenderedPrompt>& prompts) const;

 private:
  std::vector<std::string> fetch_http(const RenderedPrompt& prompt) const;

  GeneratorOptions options_;
};

// Full candidate pipeline: render, generate, filter leakage, pool, embed.
CandidatePool generate_candidates(const std::vector<PromptTemplate>& templates,
                                  const std::vector<std::string>& class_labels,
                                  const GeneratorOptions& options, const Encoder& encoder);

}  // namespace cd

#endif  // CD_CANDIDATE_GEN_HPP_
