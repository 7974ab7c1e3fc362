#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "structsent/corpus.hpp"

using namespace structsent;
using nlohmann::json;

namespace {

// Tree acceptance oracle: breadth-first traversal from the root over an
// explicit child list, independent of the chain-following validator.
bool tree_ok_oracle(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  int root = -1, roots = 0;
  for (int i = 0; i < n; ++i) {
    if (heads[i] == -1) {
      root = i;
      ++roots;
    } else if (heads[i] < 0 || heads[i] >= n || heads[i] == i) {
      return false;
    }
  }
  if (roots != 1) return false;
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i) {
    if (heads[i] != -1) children[heads[i]].push_back(i);
  }
  std::vector<bool> seen(n, false);
  std::queue<int> q;
  q.push(root);
  seen[root] = true;
  int visited = 0;
  while (!q.empty()) {
    int cur = q.front();
    q.pop();
    ++visited;
    for (int ch : children[cur]) {
      if (!seen[ch]) {
        seen[ch] = true;
        q.push(ch);
      }
    }
  }
  return visited == n;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("canonical corpus json", "[corpus]") {
  const json j = {
      {"name", "demo"},
      {"language", "en"},
      {"sentences",
       {{{"sent_id", "s1"},
         {"tokens",
          {"The", "Sadc", "ministerial", "observer", "team", "congratulated",
           "President", "Mugabe", "on", "his", "victory"}},
         {"heads", {4, 4, 4, 4, 5, -1, 7, 5, 10, 10, 5}},
         {"opinions",
          {{{"holder", {0, 4}},
            {"target", {6, 7}},
            {"expression", {5, 5}},
            {"polarity", "P"}}}}},
        {{"sent_id", "s2"},
         {"tokens", {"fine"}},
         {"heads", {-1}},
         {"opinions", json::array()}}}}};

  Corpus c = corpus_from_json(j);
  REQUIRE(c.sentences.size() == 2);
  const Sentence& s1 = c.sentences[0];
  CHECK(s1.tokens[5] == "congratulated");
  REQUIRE(s1.opinions.size() == 1);
  CHECK(s1.opinions[0].holder == Span{0, 4});
  CHECK(s1.opinions[0].target == Span{6, 7});
  CHECK(s1.opinions[0].expression == Span{5, 5});
  CHECK(s1.opinions[0].polarity == Polarity::Positive);
  CHECK(c.sentences[1].opinions.empty());
}

TEST_CASE("corpus validation failures", "[corpus]") {
  json j = {{"name", "bad"},
            {"language", "en"},
            {"sentences",
             {{{"sent_id", "c1"},
               {"tokens", {"a", "b"}},
               {"heads", {1, 0}},
               {"opinions", json::array()}}}}};
  CHECK_THROWS_AS(corpus_from_json(j), validation_error);

  j["sentences"][0]["heads"] = {1, -1};
  CHECK_NOTHROW(corpus_from_json(j));

  // Two roots.
  j["sentences"][0]["heads"] = {-1, -1};
  CHECK_THROWS_AS(corpus_from_json(j), validation_error);

  // Malformed opinion names the sentence and the field.
  j["sentences"][0]["heads"] = {1, -1};
  j["sentences"][0]["opinions"] = {{{"holder", nullptr},
                                    {"target", nullptr},
                                    {"polarity", "P"}}};
  CHECK_THROWS_WITH(corpus_from_json(j),
                    Catch::Matchers::ContainsSubstring("c1") &&
                        Catch::Matchers::ContainsSubstring("expression"));

  // Span outside the sentence.
  j["sentences"][0]["opinions"] = {{{"holder", nullptr},
                                    {"target", nullptr},
                                    {"expression", {0, 5}},
                                    {"polarity", "P"}}};
  CHECK_THROWS_AS(corpus_from_json(j), span_error);

  // Duplicate ids.
  j["sentences"][0]["opinions"] = json::array();
  j["sentences"].push_back(j["sentences"][0]);
  CHECK_THROWS_AS(corpus_from_json(j), validation_error);
}

TEST_CASE("corpus round trip", "[corpus]") {
  Corpus fixture = fixtures::fixture_corpus();
  const std::string path = temp_path("structsent_roundtrip.json");
  save_corpus(fixture, path);
  Corpus back = load_corpus(path);
  REQUIRE(back.sentences.size() == fixture.sentences.size());
  for (std::size_t i = 0; i < back.sentences.size(); ++i) {
    CHECK(back.sentences[i].sent_id == fixture.sentences[i].sent_id);
    CHECK(back.sentences[i].tokens == fixture.sentences[i].tokens);
    CHECK(back.sentences[i].heads == fixture.sentences[i].heads);
    CHECK(back.sentences[i].opinions == fixture.sentences[i].opinions);
  }
  std::remove(path.c_str());

  for (std::uint64_t seed : {3u, 4u, 5u}) {
    Corpus r = fixtures::random_corpus(seed, 6);
    Corpus r2 = corpus_from_json(corpus_to_json(r));
    REQUIRE(r2.sentences.size() == r.sentences.size());
    for (std::size_t i = 0; i < r.sentences.size(); ++i) {
      CHECK(r2.sentences[i].tokens == r.sentences[i].tokens);
      CHECK(r2.sentences[i].heads == r.sentences[i].heads);
      CHECK(r2.sentences[i].opinions == r.sentences[i].opinions);
    }
  }
}

TEST_CASE("tree validation agrees with traversal oracle", "[corpus]") {
  std::mt19937_64 gen(41);
  int accepted = 0, rejected = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + gen() % 7;
    std::vector<int> heads(n);
    for (auto& h : heads) {
      h = static_cast<int>(gen() % (n + 2)) - 1;  // deliberately often invalid
    }
    bool lib_ok = true;
    try {
      validate_heads(heads, "t");
    } catch (const validation_error&) {
      lib_ok = false;
    }
    CHECK(lib_ok == tree_ok_oracle(heads));
    (lib_ok ? accepted : rejected)++;
  }
  CHECK(accepted > 0);
  CHECK(rejected > 0);
}

TEST_CASE("truncation drops out-of-range opinions", "[corpus]") {
  json sent = {{"sent_id", "long1"},
               {"tokens", json::array()},
               {"heads", json::array()},
               {"opinions",
                {{{"holder", nullptr},
                  {"target", {2, 3}},
                  {"expression", {10, 10}},
                  {"polarity", "P"}},
                 {{"holder", nullptr},
                  {"target", {129, 129}},
                  {"expression", {10, 10}},
                  {"polarity", "N"}}}}};
  for (int i = 0; i < 130; ++i) {
    sent["tokens"].push_back("tok" + std::to_string(i));
    sent["heads"].push_back(i == 0 ? -1 : 0);
  }
  const json j = {{"name", "t"}, {"language", "en"}, {"sentences", {sent}}};

  LoadStats stats;
  Corpus c = corpus_from_json(j, kDefaultMaxSequenceLength, &stats);
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0].size() == 128);
  CHECK(c.sentences[0].heads.size() == 128);
  REQUIRE(c.sentences[0].opinions.size() == 1);
  CHECK(c.sentences[0].opinions[0].polarity == Polarity::Positive);
  CHECK(stats.truncated_sentences == 1);
  CHECK(stats.dropped_opinions == 1);
  CHECK_NOTHROW(validate_corpus(c));

  // A root beyond the cut still yields a valid single-rooted tree.
  json tail_root = sent;
  for (int i = 0; i < 130; ++i) {
    tail_root["heads"][i] = (i == 129) ? -1 : 129;
  }
  tail_root["opinions"] = json::array();
  const json j2 = {
      {"name", "t"}, {"language", "en"}, {"sentences", {tail_root}}};
  LoadStats stats2;
  Corpus c2 = corpus_from_json(j2, kDefaultMaxSequenceLength, &stats2);
  CHECK_NOTHROW(validate_corpus(c2));
  CHECK(stats2.reattached_heads == 128);
}

TEST_CASE("offset import", "[corpus]") {
  json records = json::array();
  records.push_back(
      {{"sent_id", "o1"},
       {"text", "good phone"},
       {"opinions",
        {{{"Source", {json::array(), json::array()}},
          {"Target", {{"phone"}, {"5:10"}}},
          {"Polar_expression", {{"good"}, {"0:4"}}},
          {"Polarity", "Positive"}}}}});
  // Neutral opinions disappear; multi-fragment targets keep the first
  // fragment.
  records.push_back(
      {{"sent_id", "o2"},
       {"text", "aa bb cc dd ee ff gg"},
       {"opinions",
        {{{"Source", {json::array(), json::array()}},
          {"Target", json::array({json::array({"cc", "ff gg"}),
                                  json::array({"6:8", "15:20"})})},
          {"Polar_expression", {{"bb"}, {"3:5"}}},
          {"Polarity", "Negative"}},
         {{"Source", {json::array(), json::array()}},
          {"Target", {{"dd"}, {"9:11"}}},
          {"Polar_expression", {{"ee"}, {"12:14"}}},
          {"Polarity", "Neutral"}}}}});

  const std::string path = temp_path("structsent_import.json");
  {
    std::ofstream out(path);
    out << records.dump();
  }
  LoadStats stats;
  Corpus c = import_offset_format(path, "imported", "en",
                                  kDefaultMaxSequenceLength, &stats);
  std::remove(path.c_str());

  REQUIRE(c.sentences.size() == 2);
  CHECK(c.name == "imported");
  CHECK(c.sentences[0].tokens ==
        std::vector<std::string>{"good", "phone"});
  REQUIRE(c.sentences[0].opinions.size() == 1);
  CHECK(c.sentences[0].opinions[0].expression == Span{0, 0});
  CHECK(c.sentences[0].opinions[0].target == Span{1, 1});
  CHECK_FALSE(c.sentences[0].opinions[0].holder.has_value());

  REQUIRE(c.sentences[1].opinions.size() == 1);
  CHECK(c.sentences[1].opinions[0].target == Span{2, 2});
  CHECK(stats.dropped_neutral == 1);
  CHECK(stats.multi_fragment_reduced == 1);
  CHECK(stats.fallback_trees == 2);

  // Offsets that split a token are refused.
  records[0]["opinions"][0]["Polar_expression"] = {{"goo"}, {"0:3"}};
  {
    std::ofstream out(path);
    out << records.dump();
  }
  CHECK_THROWS_AS(import_offset_format(path, "imported", "en"),
                  alignment_error);
  std::remove(path.c_str());
}

TEST_CASE("synthetic banks are seed-deterministic", "[corpus]") {
  Corpus fixture = fixtures::fixture_corpus();
  EmbeddingBank a = synthetic_bank(fixture, 2, {8, 12}, 42);
  EmbeddingBank b = synthetic_bank(fixture, 2, {8, 12}, 42);
  EmbeddingBank other = synthetic_bank(fixture, 2, {8, 12}, 43);

  REQUIRE(a.model_dims == std::vector<std::size_t>{8, 12});
  bool any_diff = false;
  for (const Sentence& s : fixture.sentences) {
    CHECK(a.entry(s.sent_id).models == b.entry(s.sent_id).models);
    if (a.entry(s.sent_id).models != other.entry(s.sent_id).models) {
      any_diff = true;
    }
  }
  CHECK(any_diff);

  // Identical tokens share a vector within a model: "the" opens s5 and s7.
  const auto& s5 = a.entry("s5").models[0];
  const auto& s7 = a.entry("s7").models[0];
  for (std::size_t c = 0; c < 8; ++c) CHECK(s5[c] == s7[c]);

  CHECK_THROWS_AS(synthetic_bank(fixture, 2, {8}, 1), config_error);
}

TEST_CASE("bank file round trip and coverage", "[corpus]") {
  Corpus fixture = fixtures::fixture_corpus();
  EmbeddingBank bank = synthetic_bank(fixture, 2, {3, 5}, 7);
  const std::string path = temp_path("structsent_bank.jsonl");
  save_embedding_bank(bank, fixture, path);
  EmbeddingBank back = load_embedding_bank(path, fixture);
  CHECK(back.model_dims == bank.model_dims);
  for (const Sentence& s : fixture.sentences) {
    // Full round-trip precision, compared bitwise.
    CHECK(back.entry(s.sent_id).models == bank.entry(s.sent_id).models);
  }
  std::remove(path.c_str());

  Corpus partial = fixture;
  partial.sentences.pop_back();
  EmbeddingBank small = synthetic_bank(partial, 1, {4}, 7);
  const std::string path2 = temp_path("structsent_bank2.jsonl");
  save_embedding_bank(small, partial, path2);
  CHECK_THROWS_WITH(load_embedding_bank(path2, fixture),
                    Catch::Matchers::ContainsSubstring("s8"));
  std::remove(path2.c_str());

  // Row-count mismatches are caught sentence by sentence.
  EmbeddingBank corrupt = synthetic_bank(fixture, 1, {4}, 7);
  corrupt.entries["s4"].models[0].resize(4);
  CHECK_THROWS_AS(check_bank_covers(corrupt, fixture), alignment_error);
}
