#pragma once

// Shared desk-scale fixtures: the 8-sentence corpus used by the overfit
// checks, a pair of template "languages" for the transfer checks, and random
// generators for property-style tests.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "structsent/corpus.hpp"
#include "structsent/rng.hpp"

namespace fixtures {

inline structsent::Corpus fixture_corpus() {
  using structsent::Opinion;
  using structsent::Polarity;
  using structsent::Sentence;
  using structsent::Span;
  structsent::Corpus c;
  c.name = "fixture";
  c.language = "en";

  c.sentences.push_back(Sentence{
      "s1",
      {"The", "Sadc", "ministerial", "observer", "team", "congratulated",
       "President", "Mugabe", "on", "his", "victory"},
      {4, 4, 4, 4, 5, -1, 7, 5, 10, 10, 5},
      {Opinion{Span{0, 4}, Span{6, 7}, Span{5, 5}, Polarity::Positive}}});

  c.sentences.push_back(Sentence{
      "s2",
      {"reviewers", "adored", "the", "camera", "quality"},
      {1, -1, 4, 4, 1},
      {Opinion{Span{0, 0}, Span{2, 4}, Span{1, 1}, Polarity::Positive}}});

  // Two expressions of opposite polarity over one shared target. The span
  // heads are linear in the token representation with a condition-dependent
  // offset, so two expressions in one sentence can share a target span but
  // cannot select disjoint ones; the fixture stays inside what the decoder
  // can represent exactly.
  c.sentences.push_back(Sentence{
      "s3",
      {"anna", "found", "the", "screen", "gorgeous", "but", "fragile"},
      {1, -1, 3, 1, 1, 6, 4},
      {Opinion{Span{0, 0}, Span{2, 3}, Span{4, 4}, Polarity::Positive},
       Opinion{Span{0, 0}, Span{2, 3}, Span{6, 6}, Polarity::Negative}}});

  // Two tokens, the shortest sentence the gradient checks run on. In a
  // two-node graph the convolution blends both tokens so heavily that the
  // span heads see nearly the same vector at each position, so this sentence
  // carries no opinion; its words also occur in s7 where they are equally
  // unlabeled.
  c.sentences.push_back(Sentence{
      "s4", {"report", "arrived"}, {1, -1}, {}});

  // Holder absent.
  c.sentences.push_back(Sentence{
      "s5",
      {"the", "service", "was", "awful"},
      {1, 3, 3, -1},
      {Opinion{std::nullopt, Span{0, 1}, Span{3, 3}, Polarity::Negative}}});

  // Target absent.
  c.sentences.push_back(Sentence{
      "s6",
      {"omar", "cheered", "loudly"},
      {1, -1, 1},
      {Opinion{structsent::Span{0, 0}, std::nullopt, Span{1, 1},
               Polarity::Positive}}});

  // No opinions at all.
  c.sentences.push_back(Sentence{
      "s7", {"the", "report", "arrived", "monday"}, {1, 2, -1, 2}, {}});

  c.sentences.push_back(Sentence{
      "s8",
      {"users", "cheered", "the", "polished", "update", "despite", "minor",
       "bugs"},
      {1, -1, 4, 4, 1, 7, 7, 1},
      {Opinion{Span{0, 0}, Span{2, 4}, Span{1, 1}, Polarity::Positive}}});

  structsent::validate_corpus(c);
  return c;
}

// ---------------------------------------------------------------------------
// Transfer template. Twelve sentences over two patterns, realized in two
// vocabularies with no common token string. Aligned words can be given the
// same bank vectors by generating the bank over the source-language strings.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& transfer_holders() {
  static const std::vector<std::string> v{"mira", "tomas", "lena"};
  return v;
}

inline const std::vector<std::string>& transfer_verbs() {
  static const std::vector<std::string> v{"adored", "praised", "loathed",
                                          "mocked"};
  return v;
}

inline const std::vector<std::string>& transfer_targets() {
  static const std::vector<std::string> v{"the_soundtrack", "the_plot",
                                          "the_visuals"};
  return v;
}

inline std::string map_to_language_b(const std::string& word) {
  static const std::unordered_map<std::string, std::string> dict{
      {"mira", "pela"},           {"tomas", "dorin"},
      {"lena", "sook"},           {"adored", "veshti"},
      {"praised", "lumat"},       {"loathed", "zorgen"},
      {"mocked", "kleim"},        {"the_soundtrack", "da_melodik"},
      {"the_plot", "da_fabel"},   {"the_visuals", "da_bilden"},
      {"really", "malto"}};
  return dict.at(word);
}

// word_map translates the source-language surface forms; pass the identity to
// build the source corpus, or map_to_language_b for the disjoint vocabulary.
inline structsent::Corpus transfer_corpus(
    const std::string& id_prefix, const std::string& language,
    const std::function<std::string(const std::string&)>& word_map) {
  using structsent::Opinion;
  using structsent::Polarity;
  using structsent::Sentence;
  using structsent::Span;
  structsent::Corpus c;
  c.name = "transfer_" + language;
  c.language = language;
  int idx = 0;
  for (std::size_t h = 0; h < transfer_holders().size(); ++h) {
    for (std::size_t v = 0; v < transfer_verbs().size(); ++v) {
      const std::string holder = word_map(transfer_holders()[h]);
      const std::string verb = word_map(transfer_verbs()[v]);
      const std::string target =
          word_map(transfer_targets()[(h + v) % transfer_targets().size()]);
      const Polarity pol = v < 2 ? Polarity::Positive : Polarity::Negative;
      Sentence s;
      s.sent_id = id_prefix + std::to_string(++idx);
      if (v % 2 == 0) {
        s.tokens = {holder, verb, target};
        s.heads = {1, -1, 1};
        s.opinions = {Opinion{Span{0, 0}, Span{2, 2}, Span{1, 1}, pol}};
      } else {
        s.tokens = {holder, word_map("really"), verb, target};
        s.heads = {2, 2, -1, 2};
        s.opinions = {Opinion{Span{0, 0}, Span{3, 3}, Span{2, 2}, pol}};
      }
      c.sentences.push_back(std::move(s));
    }
  }
  structsent::validate_corpus(c);
  return c;
}

// ---------------------------------------------------------------------------
// Random generators.
// ---------------------------------------------------------------------------

// Random single-rooted tree: token 0 is the root, every other token attaches
// to an earlier one.
inline std::vector<int> random_tree_heads(std::mt19937_64& gen,
                                          std::size_t n) {
  std::vector<int> heads(n, -1);
  for (std::size_t i = 1; i < n; ++i) {
    heads[i] = static_cast<int>(gen() % i);
  }
  return heads;
}

inline structsent::Span random_span(std::mt19937_64& gen, std::size_t n) {
  const std::size_t a = gen() % n, b = gen() % n;
  return {std::min(a, b), std::max(a, b)};
}

inline structsent::Corpus random_corpus(std::uint64_t seed, std::size_t count,
                                        const std::string& id_prefix = "r") {
  static const std::vector<std::string> vocab{
      "alpha", "bravo", "chair", "delta", "ember", "frost",
      "grape", "haste", "igloo", "jolly", "koala", "lemon"};
  std::mt19937_64 gen(seed);
  structsent::Corpus c;
  c.name = "random";
  c.language = "xx";
  for (std::size_t s = 0; s < count; ++s) {
    structsent::Sentence sent;
    sent.sent_id = id_prefix + std::to_string(s);
    const std::size_t n = 1 + gen() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      sent.tokens.push_back(vocab[gen() % vocab.size()]);
    }
    sent.heads = random_tree_heads(gen, n);
    const std::size_t opinions = gen() % 3;
    for (std::size_t o = 0; o < opinions; ++o) {
      structsent::Opinion op;
      op.expression = random_span(gen, n);
      if (gen() % 4 != 0) op.target = random_span(gen, n);
      if (gen() % 4 != 0) op.holder = random_span(gen, n);
      op.polarity = gen() % 2 ? structsent::Polarity::Positive
                              : structsent::Polarity::Negative;
      sent.opinions.push_back(op);
    }
    c.sentences.push_back(std::move(sent));
  }
  structsent::validate_corpus(c);
  return c;
}

}  // namespace fixtures
