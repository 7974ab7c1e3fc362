#pragma once

// Token-level F1 for holder / target / expression spans plus exact-match
// targeted F1 over (target span, polarity) tuples, and whole-corpus
// evaluation of a model.

#include <cstddef>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "structsent/corpus.hpp"
#include "structsent/decoder.hpp"
#include "structsent/error.hpp"
#include "structsent/model.hpp"

namespace structsent {

struct MetricCounts {
  std::size_t tp = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  // Vacuous precision/recall count as perfect: an empty prediction set
  // predicts nothing wrong, an empty gold set leaves nothing to miss. Both
  // empty therefore scores 1, one-sided emptiness scores 0.
  double precision() const {
    return predicted == 0 ? 1.0
                          : static_cast<double>(tp) /
                                static_cast<double>(predicted);
  }
  double recall() const {
    return gold == 0 ? 1.0
                     : static_cast<double>(tp) / static_cast<double>(gold);
  }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
};

struct MetricsReport {
  MetricCounts expression;
  MetricCounts target;
  MetricCounts holder;
  MetricCounts targeted;
  std::size_t gold_null_targets = 0;       // gold opinions without a target
  std::size_t predicted_null_targets = 0;  // predictions without a target

  double expression_f1() const { return expression.f1(); }
  double target_f1() const { return target.f1(); }
  double holder_f1() const { return holder.f1(); }
  double targeted_f1() const { return targeted.f1(); }
};

enum class OpinionElement { Holder, Target, Expression };

namespace detail {

inline void require_aligned(const Corpus& gold,
                            const std::vector<SentencePredictions>& pred) {
  if (gold.sentences.size() != pred.size()) {
    throw alignment_error("metrics: " +
                          std::to_string(gold.sentences.size()) +
                          " gold sentences vs " + std::to_string(pred.size()) +
                          " predicted");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gold.sentences[i].sent_id != pred[i].sent_id) {
      throw alignment_error("metrics: position " + std::to_string(i) +
                            " pairs gold \"" + gold.sentences[i].sent_id +
                            "\" with predicted \"" + pred[i].sent_id + "\"");
    }
  }
}

using TokenKey = std::pair<std::size_t, std::size_t>;  // (sentence, token)

inline void insert_span_tokens(std::set<TokenKey>& out, std::size_t sent,
                               const std::optional<Span>& span) {
  if (!span) return;
  for (std::size_t t = span->start; t <= span->end; ++t) out.insert({sent, t});
}

inline std::optional<Span> element_span(const Opinion& op, OpinionElement el) {
  switch (el) {
    case OpinionElement::Holder: return op.holder;
    case OpinionElement::Target: return op.target;
    default: return op.expression;
  }
}

inline std::optional<Span> element_span(const PredictedOpinion& op,
                                        OpinionElement el) {
  switch (el) {
    case OpinionElement::Holder: return op.holder;
    case OpinionElement::Target: return op.target;
    default: return op.expression;
  }
}

inline MetricCounts counts_from_sets(const std::set<TokenKey>& gold,
                                     const std::set<TokenKey>& pred) {
  MetricCounts c;
  c.gold = gold.size();
  c.predicted = pred.size();
  for (const TokenKey& k : pred) c.tp += gold.count(k);
  return c;
}

}  // namespace detail

inline MetricCounts token_counts(const Corpus& gold,
                                 const std::vector<SentencePredictions>& pred,
                                 OpinionElement element) {
  detail::require_aligned(gold, pred);
  std::set<detail::TokenKey> gold_tokens, pred_tokens;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    for (const Opinion& op : gold.sentences[i].opinions) {
      detail::insert_span_tokens(gold_tokens, i,
                                 detail::element_span(op, element));
    }
    for (const PredictedOpinion& op : pred[i].opinions) {
      detail::insert_span_tokens(pred_tokens, i,
                                 detail::element_span(op, element));
    }
  }
  return detail::counts_from_sets(gold_tokens, pred_tokens);
}

inline double token_f1(const Corpus& gold,
                       const std::vector<SentencePredictions>& pred,
                       OpinionElement element) {
  return token_counts(gold, pred, element).f1();
}

// (sentence, target span, polarity) exact-match tuples, deduplicated.
// Opinions without a target are excluded from both sides; the exclusions are
// reported through the optional out-parameters.
inline MetricCounts targeted_counts(
    const Corpus& gold, const std::vector<SentencePredictions>& pred,
    std::size_t* gold_null = nullptr, std::size_t* pred_null = nullptr) {
  detail::require_aligned(gold, pred);
  using Key = std::tuple<std::size_t, std::size_t, std::size_t, int>;
  std::set<Key> gold_set, pred_set;
  std::size_t gn = 0, pn = 0;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    for (const Opinion& op : gold.sentences[i].opinions) {
      if (!op.target) {
        ++gn;
        continue;
      }
      gold_set.insert({i, op.target->start, op.target->end,
                       op.polarity == Polarity::Positive ? 0 : 1});
    }
    for (const PredictedOpinion& op : pred[i].opinions) {
      if (!op.target) {
        ++pn;
        continue;
      }
      pred_set.insert({i, op.target->start, op.target->end,
                       op.polarity == Polarity::Positive ? 0 : 1});
    }
  }
  if (gold_null) *gold_null = gn;
  if (pred_null) *pred_null = pn;
  MetricCounts c;
  c.gold = gold_set.size();
  c.predicted = pred_set.size();
  for (const auto& k : pred_set) c.tp += gold_set.count(k);
  return c;
}

inline double targeted_f1(const Corpus& gold,
                          const std::vector<SentencePredictions>& pred) {
  return targeted_counts(gold, pred).f1();
}

inline MetricsReport compute_metrics(
    const Corpus& gold, const std::vector<SentencePredictions>& pred) {
  MetricsReport r;
  r.expression = token_counts(gold, pred, OpinionElement::Expression);
  r.target = token_counts(gold, pred, OpinionElement::Target);
  r.holder = token_counts(gold, pred, OpinionElement::Holder);
  r.targeted = targeted_counts(gold, pred, &r.gold_null_targets,
                               &r.predicted_null_targets);
  return r;
}

inline MetricsReport evaluate(const ModelState& model, const Corpus& corpus,
                              const EmbeddingBank& bank, double threshold) {
  return compute_metrics(corpus,
                         predict_corpus(corpus, bank, model, threshold));
}

inline nlohmann::json counts_json(const MetricCounts& c) {
  return {{"tp", c.tp},
          {"predicted", c.predicted},
          {"gold", c.gold},
          {"precision", c.precision()},
          {"recall", c.recall()},
          {"f1", c.f1()}};
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  return {{"expression_f1", r.expression_f1()},
          {"target_f1", r.target_f1()},
          {"holder_f1", r.holder_f1()},
          {"targeted_f1", r.targeted_f1()},
          {"counts",
           {{"expression", counts_json(r.expression)},
            {"target", counts_json(r.target)},
            {"holder", counts_json(r.holder)},
            {"targeted", counts_json(r.targeted)}}},
          {"excluded_null_targets",
           {{"gold", r.gold_null_targets},
            {"predicted", r.predicted_null_targets}}}};
}

}  // namespace structsent
