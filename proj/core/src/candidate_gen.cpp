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

#include "cd/candidate_gen.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>

#include <json.hpp>

#include "cd/error.hpp"

namespace cd {
namespace {

constexpr const char kPlaceholder[] = "[CLASS NAME]";

std::string regex_escape(const std::string& s) {
  static const std::string kSpecial = R"(\.^$|()[]{}*+?)";
  std::string out;
  for (char c : s) {
    if (kSpecial.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string squeeze_whitespace(const std::string& s) {
  std::string out;
  bool in_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string pattern) : pattern_(std::move(pattern)) {
  const std::size_t first = pattern_.find(kPlaceholder);
  if (first == std::string::npos)
    fail(ErrorKind::kTemplateError, "template has no [CLASS NAME] placeholder: " + pattern_);
  if (pattern_.find(kPlaceholder, first + 1) != std::string::npos)
    fail(ErrorKind::kTemplateError, "template has multiple placeholders: " + pattern_);
}

std::string PromptTemplate::render(const std::string& class_name) const {
  std::string out = pattern_;
  out.replace(out.find(kPlaceholder), sizeof(kPlaceholder) - 1, class_name);
  return out;
}

std::vector<PromptTemplate> default_templates() {
  return {
      PromptTemplate("describe what a [CLASS NAME] looks like"),
      PromptTemplate("describe a [CLASS NAME]"),
      PromptTemplate("what are the identifying characteristics of a [CLASS NAME]?"),
      PromptTemplate("list the distinguishing features of a [CLASS NAME]"),
      PromptTemplate("how would you recognize a [CLASS NAME]?"),
  };
}

std::vector<RenderedPrompt> render_prompts(const std::vector<PromptTemplate>& templates,
                                           const std::vector<std::string>& class_labels) {
  if (templates.empty()) fail(ErrorKind::kInvalidInput, "no templates");
  if (class_labels.empty()) fail(ErrorKind::kInvalidInput, "no class labels");
  std::vector<RenderedPrompt> out;
  out.reserve(templates.size() * class_labels.size());
  for (const std::string& label : class_labels) {
    for (std::size_t t = 0; t < templates.size(); ++t) {
      RenderedPrompt p;
      p.class_label = label;
      p.template_id = static_cast<int>(t);
      p.text = templates[t].render(label);
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<ConceptCandidate> filter_leakage(std::vector<ConceptCandidate> candidates,
                                             const std::vector<std::string>& class_labels) {
  std::vector<std::regex> patterns;
  patterns.reserve(class_labels.size());
  for (const std::string& label : class_labels) {
    const std::string body = regex_escape(label);
    patterns.emplace_back("\\b" + body + "s?\\b",
                          std::regex::icase | std::regex::ECMAScript);
  }
  std::vector<ConceptCandidate> kept;
  kept.reserve(candidates.size());
  for (ConceptCandidate& c : candidates) {
    std::string text = c.text;
    for (const std::regex& re : patterns) text = std::regex_replace(text, re, " ");
    text = squeeze_whitespace(text);
    if (text.empty()) continue;
    c.text = std::move(text);
    kept.push_back(std::move(c));
  }
  return kept;
}

GeneratorClient::GeneratorClient(GeneratorOptions options) : options_(std::move(options)) {
  if (options_.samples_per_prompt <= 0)
    fail(ErrorKind::kInvalidInput, "samples_per_prompt must be positive");
}

std::vector<ConceptCandidate> GeneratorClient::generate(
    const std::vector<RenderedPrompt>& prompts) const {
  std::vector<ConceptCandidate> out;
  if (options_.kind == GeneratorKind::kStub) {
    std::ifstream in(options_.stub_path);
    if (!in)
      fail(ErrorKind::kFileError, "cannot open stub file " + options_.stub_path.string());
    // class -> template_id -> recorded texts, in file order.
    std::map<std::string, std::map<int, std::vector<std::string>>> recorded;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("class") || !j.contains("template_id") ||
          !j.contains("text")) {
        fail(ErrorKind::kParseError, "bad stub record at line " + std::to_string(line_no) +
                                         " in " + options_.stub_path.string());
      }
      recorded[j["class"].get<std::string>()][j["template_id"].get<int>()].push_back(
          j["text"].get<std::string>());
    }
    int next_id = 0;
    for (const RenderedPrompt& p : prompts) {
      const auto class_it = recorded.find(p.class_label);
      if (class_it == recorded.end()) continue;
      const auto tmpl_it = class_it->second.find(p.template_id);
      if (tmpl_it == class_it->second.end()) continue;
      const auto& texts = tmpl_it->second;
      const std::size_t n =
          std::min<std::size_t>(texts.size(), static_cast<std::size_t>(options_.samples_per_prompt));
      for (std::size_t i = 0; i < n; ++i) {
        ConceptCandidate c;
        c.id = next_id++;
        c.class_label = p.class_label;
        c.text = texts[i];
        out.push_back(std::move(c));
      }
    }
  } else {
    int next_id = 0;
    for (const RenderedPrompt& p : prompts) {
      for (std::string& text : fetch_http(p)) {
        ConceptCandidate c;
        c.id = next_id++;
        c.class_label = p.class_label;
        c.text = std::move(text);
        out.push_back(std::move(c));
      }
    }
  }
  if (out.empty()) fail(ErrorKind::kEmptyPool, "generator produced no candidates");
  return out;
}

CandidatePool generate_candidates(const std::vector<PromptTemplate>& templates,
                                  const std::vector<std::string>& class_labels,
                                  const GeneratorOptions& options, const Encoder& encoder) {
  const std::vector<RenderedPrompt> prompts = render_prompts(templates, class_labels);
  GeneratorClient client(options);
  std::vector<ConceptCandidate> cands = client.generate(prompts);
  cands = filter_leakage(std::move(cands), class_labels);
  if (cands.empty()) fail(ErrorKind::kEmptyPool, "all candidates removed by leakage filter");
  for (std::size_t i = 0; i < cands.size(); ++i) cands[i].id = static_cast<int>(i);
  CandidatePool pool(std::move(cands));
  pool.ensure_embeddings(encoder);
  return pool;
}

}  // namespace cd
