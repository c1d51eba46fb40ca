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

#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "cd/candidate_gen.hpp"
#include "cd/error.hpp"

namespace cd {

std::vector<std::string> GeneratorClient::fetch_http(const RenderedPrompt& prompt) const {
  const char* url = std::getenv("CD_GEN_URL");
  if (url == nullptr || *url == '\0')
    fail(ErrorKind::kGenerationError, "CD_GEN_URL is not set");

  std::string base(url);
  std::string path = "/";
  const std::size_t scheme = base.find("://");
  const std::size_t slash = base.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash != std::string::npos) {
    path = base.substr(slash);
    base = base.substr(0, slash);
  }

  httplib::Client client(base);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);

  httplib::Headers headers;
  if (const char* token = std::getenv("CD_GEN_TOKEN"); token != nullptr && *token != '\0')
    headers.emplace("Authorization", std::string("Bearer ") + token);

  nlohmann::json body;
  body["prompt"] = prompt.text;
  body["n"] = options_.samples_per_prompt;
  body["instruction"] = options_.instruction;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < options_.max_retries; ++attempt) {
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("texts") || !j["texts"].is_array()) {
      last_error = "malformed response body";
      continue;
    }
    return j["texts"].get<std::vector<std::string>>();
  }
  fail(ErrorKind::kGenerationError,
       "generator request failed after " + std::to_string(options_.max_retries) +
           " attempts: " + last_error);
}

}  // namespace cd
