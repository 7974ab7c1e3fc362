#pragma once

// Corpus and embedding-bank data model with the on-disk formats. A corpus is
// a named list of sentences, each carrying tokens, a single-rooted dependency
// tree (head indices, root = -1), and gold opinions whose holder/target may be
// absent. Banks hold frozen per-model embedding matrices keyed by sent_id.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "structsent/error.hpp"
#include "structsent/rng.hpp"

namespace structsent {

inline constexpr std::size_t kDefaultMaxSequenceLength = 128;

// Inclusive token range, 0-based.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

enum class Polarity { Positive, Negative };

inline std::string polarity_str(Polarity p) {
  return p == Polarity::Positive ? "P" : "N";
}

inline Polarity polarity_from_str(const std::string& s) {
  if (s == "P") return Polarity::Positive;
  if (s == "N") return Polarity::Negative;
  throw parse_error("polarity: expected \"P\" or \"N\", got \"" + s + "\"");
}

struct Opinion {
  std::optional<Span> holder;
  std::optional<Span> target;
  Span expression;
  Polarity polarity = Polarity::Positive;
  friend bool operator==(const Opinion&, const Opinion&) = default;
};

struct Sentence {
  std::string sent_id;
  std::vector<std::string> tokens;
  std::vector<int> heads;
  std::vector<Opinion> opinions;
  std::size_t size() const { return tokens.size(); }
};

struct Corpus {
  std::string name;
  std::string language;
  std::vector<Sentence> sentences;
};

// Per-sentence frozen embeddings: one row-major |x| x d_k matrix per model.
struct BankEntry {
  std::vector<std::vector<double>> models;
};

struct EmbeddingBank {
  std::vector<std::size_t> model_dims;
  std::unordered_map<std::string, BankEntry> entries;

  const BankEntry& entry(const std::string& sent_id) const {
    auto it = entries.find(sent_id);
    if (it == entries.end()) {
      throw coverage_error("bank: no embeddings for sentence \"" + sent_id +
                           "\"");
    }
    return it->second;
  }
};

// Counts of lossy repairs applied while loading, reported to callers.
struct LoadStats {
  std::size_t truncated_sentences = 0;
  std::size_t dropped_opinions = 0;
  std::size_t dropped_neutral = 0;
  std::size_t multi_fragment_reduced = 0;
  std::size_t reattached_heads = 0;
  std::size_t dropped_empty_expression = 0;
  std::size_t fallback_trees = 0;
};

// Rejects forests, cycles, self-loops, out-of-range heads, and any root count
// other than exactly one.
inline void validate_heads(const std::vector<int>& heads,
                           const std::string& sent_id) {
  const int n = static_cast<int>(heads.size());
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const int h = heads[i];
    if (h == -1) {
      ++roots;
      continue;
    }
    if (h < 0 || h >= n) {
      throw validation_error("sentence \"" + sent_id + "\": head " +
                             std::to_string(h) + " of token " +
                             std::to_string(i) + " out of range");
    }
    if (h == i) {
      throw validation_error("sentence \"" + sent_id + "\": token " +
                             std::to_string(i) + " is its own head");
    }
  }
  if (roots != 1) {
    throw validation_error("sentence \"" + sent_id + "\": expected exactly " +
                           "one root, found " + std::to_string(roots));
  }
  // Every token must reach the root without revisiting a node.
  for (int i = 0; i < n; ++i) {
    int cur = i, steps = 0;
    while (cur != -1) {
      cur = heads[cur];
      if (++steps > n) {
        throw validation_error("sentence \"" + sent_id +
                               "\": head cycle involving token " +
                               std::to_string(i));
      }
    }
  }
}

inline void validate_span(const Span& s, std::size_t n,
                          const std::string& sent_id, const char* what) {
  if (s.start > s.end || s.end >= n) {
    throw span_error("sentence \"" + sent_id + "\": " + what + " span [" +
                     std::to_string(s.start) + "," + std::to_string(s.end) +
                     "] invalid for length " + std::to_string(n));
  }
}

inline void validate_sentence(const Sentence& s) {
  if (s.tokens.empty()) {
    throw validation_error("sentence \"" + s.sent_id + "\": no tokens");
  }
  if (s.heads.size() != s.tokens.size()) {
    throw validation_error("sentence \"" + s.sent_id + "\": " +
                           std::to_string(s.heads.size()) + " heads for " +
                           std::to_string(s.tokens.size()) + " tokens");
  }
  validate_heads(s.heads, s.sent_id);
  for (const Opinion& o : s.opinions) {
    validate_span(o.expression, s.size(), s.sent_id, "expression");
    if (o.holder) validate_span(*o.holder, s.size(), s.sent_id, "holder");
    if (o.target) validate_span(*o.target, s.size(), s.sent_id, "target");
  }
}

inline void validate_corpus(const Corpus& c) {
  std::unordered_set<std::string> ids;
  for (const Sentence& s : c.sentences) {
    if (!ids.insert(s.sent_id).second) {
      throw validation_error("corpus \"" + c.name + "\": duplicate sent_id \"" +
                             s.sent_id + "\"");
    }
    validate_sentence(s);
  }
}

namespace detail {

inline bool span_fits(const std::optional<Span>& s, std::size_t n) {
  return !s || s->end < n;
}

// Cuts a sentence to its first max_len tokens. Tokens whose head falls past
// the cut are re-rooted: the original root survives if it is inside the
// prefix, otherwise the first orphan becomes the root, and every other orphan
// attaches to that root. Opinions touching removed tokens are dropped.
inline void truncate_sentence(Sentence& s, std::size_t max_len,
                              LoadStats& stats) {
  if (s.size() <= max_len) return;
  ++stats.truncated_sentences;
  s.tokens.resize(max_len);
  std::vector<int> heads(s.heads.begin(),
                         s.heads.begin() + static_cast<long>(max_len));
  int root = -1;
  for (std::size_t i = 0; i < max_len; ++i) {
    if (heads[i] == -1) root = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < max_len; ++i) {
    if (heads[i] >= static_cast<int>(max_len)) {
      ++stats.reattached_heads;
      if (root == -1) {
        root = static_cast<int>(i);
        heads[i] = -1;
      } else {
        heads[i] = root;
      }
    }
  }
  s.heads = std::move(heads);
  std::vector<Opinion> kept;
  for (const Opinion& o : s.opinions) {
    if (o.expression.end < max_len && span_fits(o.holder, max_len) &&
        span_fits(o.target, max_len)) {
      kept.push_back(o);
    } else {
      ++stats.dropped_opinions;
    }
  }
  s.opinions = std::move(kept);
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* key,
                                   const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw parse_error(where + ": missing field \"" + key + "\"");
  }
  return *it;
}

inline std::optional<Span> span_from_json(const nlohmann::json& j,
                                          const std::string& where,
                                          const char* what) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer() || j[0].get<long>() < 0 ||
      j[1].get<long>() < 0) {
    throw parse_error(where + ": " + what +
                      " must be null or [start, end], got " + j.dump());
  }
  return Span{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace detail

inline nlohmann::json corpus_to_json(const Corpus& c) {
  nlohmann::json sentences = nlohmann::json::array();
  for (const Sentence& s : c.sentences) {
    nlohmann::json opinions = nlohmann::json::array();
    for (const Opinion& o : s.opinions) {
      opinions.push_back(
          {{"holder", o.holder ? nlohmann::json{o.holder->start, o.holder->end}
                               : nlohmann::json(nullptr)},
           {"target", o.target ? nlohmann::json{o.target->start, o.target->end}
                               : nlohmann::json(nullptr)},
           {"expression",
            nlohmann::json{o.expression.start, o.expression.end}},
           {"polarity", polarity_str(o.polarity)}});
    }
    sentences.push_back({{"sent_id", s.sent_id},
                         {"tokens", s.tokens},
                         {"heads", s.heads},
                         {"opinions", opinions}});
  }
  return {{"name", c.name}, {"language", c.language}, {"sentences", sentences}};
}

inline Corpus corpus_from_json(const nlohmann::json& j,
                               std::size_t max_len = kDefaultMaxSequenceLength,
                               LoadStats* stats = nullptr) {
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  if (!j.is_object()) {
    throw parse_error("corpus: expected a JSON object at top level");
  }
  Corpus c;
  c.name = detail::field(j, "name", "corpus").get<std::string>();
  c.language = detail::field(j, "language", "corpus").get<std::string>();
  for (const auto& js : detail::field(j, "sentences", "corpus")) {
    Sentence s;
    if (!js.is_object() || !js.contains("sent_id") ||
        !js["sent_id"].is_string()) {
      throw parse_error("corpus \"" + c.name +
                        "\": sentence record without a string sent_id: " +
                        js.dump().substr(0, 120));
    }
    s.sent_id = js["sent_id"].get<std::string>();
    const std::string where = "sentence \"" + s.sent_id + "\"";
    try {
      s.tokens =
          detail::field(js, "tokens", where).get<std::vector<std::string>>();
      s.heads = detail::field(js, "heads", where).get<std::vector<int>>();
      for (const auto& jo : detail::field(js, "opinions", where)) {
        Opinion o;
        o.holder =
            detail::span_from_json(detail::field(jo, "holder", where), where,
                                   "holder");
        o.target =
            detail::span_from_json(detail::field(jo, "target", where), where,
                                   "target");
        auto expr = detail::span_from_json(
            detail::field(jo, "expression", where), where, "expression");
        if (!expr) {
          throw parse_error(where + ": expression must not be null");
        }
        o.expression = *expr;
        o.polarity = polarity_from_str(
            detail::field(jo, "polarity", where).get<std::string>());
        s.opinions.push_back(o);
      }
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(where + ": " + e.what());
    }
    validate_sentence(s);
    detail::truncate_sentence(s, max_len, st);
    c.sentences.push_back(std::move(s));
  }
  validate_corpus(c);
  return c;
}

inline Corpus load_corpus(const std::string& path,
                          std::size_t max_len = kDefaultMaxSequenceLength,
                          LoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw parse_error("corpus: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error("corpus " + path + ": " + e.what());
  }
  return corpus_from_json(j, max_len, stats);
}

inline void save_corpus(const Corpus& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("corpus: cannot write " + path);
  out << corpus_to_json(c).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Character-offset import.
//
// Accepts the common review-corpus layout: a JSON array of records with
// "sent_id", "text", and "opinions" whose elements carry parallel
// [fragments, "begin:end" offsets] pairs under Source / Target /
// Polar_expression, plus a "Polarity" string. Offsets are character ranges
// with exclusive end, mapped onto whitespace tokens. Discontiguous elements
// keep their first fragment; neutral opinions are skipped; records may carry
// an optional "heads" array, otherwise a flat fallback tree rooted at token 0
// is attached.
// ---------------------------------------------------------------------------

namespace detail {

struct CharTok {
  std::size_t begin = 0;  // first char
  std::size_t end = 0;    // one past last char
};

inline std::vector<CharTok> whitespace_tokens(const std::string& text) {
  std::vector<CharTok> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i >= text.size()) break;
    std::size_t b = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    toks.push_back({b, i});
  }
  return toks;
}

// "12:34" -> pair of char offsets.
inline std::pair<std::size_t, std::size_t> parse_offset(
    const std::string& s, const std::string& where) {
  const auto colon = s.find(':');
  std::size_t b = 0, e = 0;
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    b = std::stoul(s.substr(0, colon));
    e = std::stoul(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw parse_error(where + ": bad offset \"" + s + "\"");
  }
  return {b, e};
}

// Maps one character fragment onto the token span whose boundaries coincide
// with the fragment boundaries.
inline Span offsets_to_span(std::size_t b, std::size_t e,
                            const std::vector<CharTok>& toks,
                            const std::string& where) {
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].begin == b) first = i;
    if (toks[i].end == e) last = i;
  }
  if (!first || !last || *first > *last) {
    throw alignment_error(where + ": offsets " + std::to_string(b) + ":" +
                          std::to_string(e) +
                          " do not align with token boundaries");
  }
  return Span{*first, *last};
}

// One element (Source / Target / Polar_expression): [[fragments], [offsets]].
inline std::optional<Span> element_span(const nlohmann::json& el,
                                        const std::vector<CharTok>& toks,
                                        const std::string& where,
                                        LoadStats& stats) {
  if (!el.is_array() || el.size() != 2 || !el[1].is_array()) {
    throw parse_error(where + ": element must be [fragments, offsets], got " +
                      el.dump().substr(0, 120));
  }
  const auto& offsets = el[1];
  if (offsets.empty()) return std::nullopt;
  if (offsets.size() > 1) ++stats.multi_fragment_reduced;
  Span best{0, 0};
  bool have = false;
  for (const auto& jo : offsets) {
    auto [b, e] = parse_offset(jo.get<std::string>(), where);
    Span s = offsets_to_span(b, e, toks, where);
    if (!have || s.start < best.start) {
      best = s;
      have = true;
    }
  }
  return best;
}

}  // namespace detail

inline Corpus import_offset_format(const std::string& path,
                                   const std::string& name,
                                   const std::string& language,
                                   std::size_t max_len =
                                       kDefaultMaxSequenceLength,
                                   LoadStats* stats = nullptr) {
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  std::ifstream in(path);
  if (!in) throw parse_error("import: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error("import " + path + ": " + e.what());
  }
  if (!j.is_array()) {
    throw parse_error("import " + path + ": expected a JSON array of records");
  }
  Corpus c;
  c.name = name;
  c.language = language;
  for (const auto& jr : j) {
    Sentence s;
    s.sent_id = detail::field(jr, "sent_id", "import record").get<std::string>();
    const std::string where = "sentence \"" + s.sent_id + "\"";
    const std::string text =
        detail::field(jr, "text", where).get<std::string>();
    const auto toks = detail::whitespace_tokens(text);
    if (toks.empty()) {
      throw parse_error(where + ": empty text");
    }
    for (const auto& t : toks) {
      s.tokens.push_back(text.substr(t.begin, t.end - t.begin));
    }
    if (jr.contains("heads")) {
      s.heads = jr["heads"].get<std::vector<int>>();
    } else {
      ++st.fallback_trees;
      s.heads.assign(s.tokens.size(), 0);
      s.heads[0] = -1;
    }
    for (const auto& jo : detail::field(jr, "opinions", where)) {
      const std::string pol =
          detail::field(jo, "Polarity", where).get<std::string>();
      if (pol == "Neutral") {
        ++st.dropped_neutral;
        continue;
      }
      Opinion o;
      if (pol == "Positive") {
        o.polarity = Polarity::Positive;
      } else if (pol == "Negative") {
        o.polarity = Polarity::Negative;
      } else {
        throw parse_error(where + ": unknown polarity \"" + pol + "\"");
      }
      auto expr = detail::element_span(
          detail::field(jo, "Polar_expression", where), toks, where, st);
      if (!expr) {
        ++st.dropped_empty_expression;
        continue;
      }
      o.expression = *expr;
      o.holder = detail::element_span(detail::field(jo, "Source", where), toks,
                                      where, st);
      o.target = detail::element_span(detail::field(jo, "Target", where), toks,
                                      where, st);
      s.opinions.push_back(o);
    }
    validate_sentence(s);
    detail::truncate_sentence(s, max_len, st);
    c.sentences.push_back(std::move(s));
  }
  validate_corpus(c);
  return c;
}

// ---------------------------------------------------------------------------
// Embedding banks.
//
// File format: JSON lines. The first line is {"model_dims": [d_1, ..., d_K]};
// each following line is {"sent_id": ..., "models": [matrix per model]} where
// a matrix is a list of |x| rows of d_k reals.
// ---------------------------------------------------------------------------

inline void check_bank_covers(const EmbeddingBank& bank, const Corpus& c) {
  for (const Sentence& s : c.sentences) {
    const BankEntry& e = bank.entry(s.sent_id);
    if (e.models.size() != bank.model_dims.size()) {
      throw alignment_error("bank: sentence \"" + s.sent_id + "\" has " +
                            std::to_string(e.models.size()) + " models, " +
                            "expected " +
                            std::to_string(bank.model_dims.size()));
    }
    for (std::size_t k = 0; k < e.models.size(); ++k) {
      const std::size_t expect = s.size() * bank.model_dims[k];
      if (e.models[k].size() != expect) {
        throw alignment_error(
            "bank: sentence \"" + s.sent_id + "\" model " + std::to_string(k) +
            " holds " + std::to_string(e.models[k].size()) +
            " values, expected " + std::to_string(expect) + " (" +
            std::to_string(s.size()) + " tokens x " +
            std::to_string(bank.model_dims[k]) + ")");
      }
    }
  }
}

inline EmbeddingBank load_embedding_bank(const std::string& path,
                                         const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw parse_error("bank: cannot open " + path);
  EmbeddingBank bank;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw parse_error("bank " + path + " line " + std::to_string(lineno) +
                        ": " + e.what());
    }
    if (lineno == 1) {
      bank.model_dims = detail::field(j, "model_dims", "bank header")
                            .get<std::vector<std::size_t>>();
      if (bank.model_dims.empty()) {
        throw parse_error("bank " + path + ": model_dims is empty");
      }
      continue;
    }
    const std::string id =
        detail::field(j, "sent_id", "bank line").get<std::string>();
    BankEntry entry;
    for (const auto& jm : detail::field(j, "models", "bank line")) {
      std::vector<double> flat;
      for (const auto& jrow : jm) {
        for (const auto& jv : jrow) flat.push_back(jv.get<double>());
      }
      entry.models.push_back(std::move(flat));
    }
    bank.entries[id] = std::move(entry);
  }
  if (bank.model_dims.empty()) {
    throw parse_error("bank " + path + ": missing header line");
  }
  check_bank_covers(bank, corpus);
  return bank;
}

inline void save_embedding_bank(const EmbeddingBank& bank, const Corpus& corpus,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("bank: cannot write " + path);
  out << nlohmann::json{{"model_dims", bank.model_dims}}.dump() << "\n";
  for (const Sentence& s : corpus.sentences) {
    const BankEntry& e = bank.entry(s.sent_id);
    nlohmann::json models = nlohmann::json::array();
    for (std::size_t k = 0; k < e.models.size(); ++k) {
      const std::size_t d = bank.model_dims[k];
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t i = 0; i < s.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c2 = 0; c2 < d; ++c2) {
          row.push_back(e.models[k][i * d + c2]);
        }
        rows.push_back(std::move(row));
      }
      models.push_back(std::move(rows));
    }
    out << nlohmann::json{{"sent_id", s.sent_id}, {"models", models}}.dump()
        << "\n";
  }
}

// Deterministic pseudo-random bank. A token's vector in model k depends only
// on (seed, k, token string), so repeated tokens share vectors within a model
// and across sentences.
inline EmbeddingBank synthetic_bank(const Corpus& corpus, std::size_t models,
                                    const std::vector<std::size_t>& dims,
                                    std::uint64_t seed) {
  if (dims.size() != models) {
    throw config_error("synthetic_bank: " + std::to_string(dims.size()) +
                       " dims for " + std::to_string(models) + " models");
  }
  for (std::size_t d : dims) {
    if (d == 0) throw config_error("synthetic_bank: zero model dimension");
  }
  EmbeddingBank bank;
  bank.model_dims = dims;
  for (const Sentence& s : corpus.sentences) {
    BankEntry entry;
    for (std::size_t k = 0; k < models; ++k) {
      const std::size_t d = dims[k];
      std::vector<double> flat(s.size() * d);
      for (std::size_t i = 0; i < s.size(); ++i) {
        std::mt19937_64 gen(
            mix_seed(mix_seed(seed, k), fnv1a(s.tokens[i])));
        for (std::size_t c = 0; c < d; ++c) {
          flat[i * d + c] = uniform_in(gen, -1.0, 1.0);
        }
      }
      entry.models.push_back(std::move(flat));
    }
    bank.entries[s.sent_id] = std::move(entry);
  }
  return bank;
}

}  // namespace structsent
