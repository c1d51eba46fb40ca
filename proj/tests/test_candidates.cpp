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

#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "cd/candidates.hpp"
#include "cd/error.hpp"
#include "test_util.hpp"

using cd::CandidatePool;
using cd::ConceptCandidate;
using cd::ErrorKind;
using cd_test::TempDir;
using cd_test::throws_kind;

namespace {

ConceptCandidate make(int id, const std::string& cls, const std::string& text) {
  ConceptCandidate c;
  c.id = id;
  c.class_label = cls;
  c.text = text;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("candidates");

TEST_CASE("fresh candidates get sequential ids") {
  std::vector<ConceptCandidate> cands = {make(-1, "pos", "warm"), make(-1, "neg", "cold"),
                                         make(-1, "pos", "bright")};
  const CandidatePool pool(std::move(cands));
  REQUIRE(pool.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(pool.by_id(i).id == i);
  CHECK(pool.by_id(0).text == "warm");
  CHECK(pool.by_id(2).text == "bright");
}

TEST_CASE("explicit ids are preserved and indexed") {
  std::vector<ConceptCandidate> cands = {make(5, "a", "x"), make(1, "b", "y")};
  const CandidatePool pool(std::move(cands));
  CHECK(pool.by_id(5).text == "x");
  CHECK(pool.by_id(1).text == "y");
  CHECK(pool.all().front().id == 1);
}

TEST_CASE("duplicate ids are rejected") {
  std::vector<ConceptCandidate> cands = {make(1, "a", "x"), make(1, "b", "y")};
  CHECK(throws_kind(ErrorKind::kInvalidInput,
                    [&] { CandidatePool pool(std::move(cands)); }));
}

TEST_CASE("classes partition the pool") {
  std::vector<ConceptCandidate> cands = {make(-1, "pos", "w"), make(-1, "neg", "c"),
                                         make(-1, "pos", "b"), make(-1, "neg", "d")};
  const CandidatePool pool(std::move(cands));
  const auto labels = pool.class_labels();
  REQUIRE(labels.size() == 2);

  std::set<int> seen;
  std::size_t total = 0;
  for (const std::string& label : labels) {
    const auto members = pool.of_class(label);
    total += members.size();
    for (const ConceptCandidate* c : members) {
      CHECK(c->class_label == label);
      CHECK(seen.insert(c->id).second);
    }
  }
  CHECK(total == pool.size());
}

TEST_CASE("of_class is sorted by id and empty class throws") {
  std::vector<ConceptCandidate> cands = {make(3, "pos", "c"), make(0, "pos", "a"),
                                         make(7, "neg", "z")};
  const CandidatePool pool(std::move(cands));
  const auto members = pool.of_class("pos");
  REQUIRE(members.size() == 2);
  CHECK(members[0]->id == 0);
  CHECK(members[1]->id == 3);
  CHECK(throws_kind(ErrorKind::kEmptyClass, [&] { pool.of_class("ghost"); }));
}

TEST_CASE("unknown id throws") {
  const CandidatePool pool(std::vector<ConceptCandidate>{make(-1, "a", "x")});
  CHECK(throws_kind(ErrorKind::kInvalidInput, [&] { pool.by_id(42); }));
}

TEST_CASE("ensure_embeddings fills missing vectors only") {
  std::vector<ConceptCandidate> cands = {make(-1, "a", "one"), make(-1, "a", "two")};
  cands[0].embedding = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  CandidatePool pool(std::move(cands));
  const cd::Encoder enc = cd::Encoder::hash_encoder(8, 0);
  pool.ensure_embeddings(enc);
  CHECK(pool.by_id(0).embedding[0] == 1.0);
  CHECK(pool.by_id(1).has_embedding());
  CHECK(pool.by_id(1).embedding.size() == 8);
}

TEST_CASE("save and load round trip") {
  TempDir dir;
  std::vector<ConceptCandidate> cands = {make(-1, "pos", "warm tone"),
                                         make(-1, "neg", "cold tone")};
  const CandidatePool pool(std::move(cands));
  pool.save(dir.file("pool.jsonl"));
  const CandidatePool back = CandidatePool::load(dir.file("pool.jsonl"));
  REQUIRE(back.size() == 2);
  CHECK(back.by_id(0).text == "warm tone");
  CHECK(back.by_id(0).class_label == "pos");
  CHECK(back.by_id(1).text == "cold tone");
}

TEST_CASE("load rejects malformed and missing files") {
  TempDir dir;
  cd_test::write_file(dir.file("bad.jsonl"), "not json\n");
  CHECK(throws_kind(ErrorKind::kParseError,
                    [&] { CandidatePool::load(dir.file("bad.jsonl")); }));
  cd_test::write_file(dir.file("schema.jsonl"), "{\"id\":0,\"class\":\"a\"}\n");
  CHECK(throws_kind(ErrorKind::kSchemaError,
                    [&] { CandidatePool::load(dir.file("schema.jsonl")); }));
  CHECK(throws_kind(ErrorKind::kFileError,
                    [&] { CandidatePool::load(dir.file("nope.jsonl")); }));
}

TEST_SUITE_END();
