#pragma once

// Task heads over the encoded token matrix: expression start/end extraction,
// expression-conditioned target and holder extraction, polarity
// classification, plus greedy span inference and the teacher-forced losses.

#include <array>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "structsent/corpus.hpp"
#include "structsent/error.hpp"
#include "structsent/tensor.hpp"

namespace structsent {

// One sigmoid scoring head: probability sigmoid(w . h + b) per token row.
struct HeadParams {
  Tensor w;  // input_dim
  Tensor b;  // 1
};

struct DecoderParams {
  HeadParams exp_start, exp_end;  // d -> 1
  HeadParams tgt_start, tgt_end;  // 3d -> 1
  HeadParams hld_start, hld_end;  // 3d -> 1
  Tensor polarity_w;              // 3d x 2
  Tensor polarity_b;              // 2
};

struct SpanScores {
  Tensor start;  // |x| x 1
  Tensor end;    // |x| x 1
  std::size_t tokens() const { return start.rows(); }
  double start_prob(std::size_t i) const { return start.values().at(i); }
  double end_prob(std::size_t i) const { return end.values().at(i); }
};

enum class ConditionedHead { Target, Holder };

namespace detail {

inline Tensor head_probs(const Tensor& feats, const HeadParams& head) {
  if (feats.cols() != head.w.size()) {
    throw dimension_error("scoring head expects dim " +
                          std::to_string(head.w.size()) + ", got " +
                          std::to_string(feats.cols()));
  }
  Tensor logits = add_row_bias(
      matmul(feats, reshape(head.w, {head.w.size(), 1})), head.b);
  return activation(logits, Activation::Sigmoid);
}

inline void check_expr_span(const Span& expr, std::size_t n) {
  if (expr.start > expr.end || expr.end >= n) {
    throw span_error("expression span [" + std::to_string(expr.start) + "," +
                     std::to_string(expr.end) + "] invalid for length " +
                     std::to_string(n));
  }
}

// [h_i; h_{expr.start}; h_{expr.end}] for every token i.
inline Tensor conditioned_features(const Tensor& H, const Span& expr) {
  check_expr_span(expr, H.rows());
  const std::size_t n = H.rows();
  Tensor es = tile_rows(row(H, expr.start), n);
  Tensor ee = tile_rows(row(H, expr.end), n);
  return concat_cols({H, es, ee});
}

}  // namespace detail

inline SpanScores expression_scores(const Tensor& H,
                                    const DecoderParams& params) {
  return {detail::head_probs(H, params.exp_start),
          detail::head_probs(H, params.exp_end)};
}

inline SpanScores conditioned_scores(const Tensor& H, const Span& expr,
                                     ConditionedHead which,
                                     const DecoderParams& params) {
  Tensor feats = detail::conditioned_features(H, expr);
  if (which == ConditionedHead::Target) {
    return {detail::head_probs(feats, params.tgt_start),
            detail::head_probs(feats, params.tgt_end)};
  }
  return {detail::head_probs(feats, params.hld_start),
          detail::head_probs(feats, params.hld_end)};
}

// softmax(W [maxpool(H); h_{expr.start}; h_{expr.end}] + b), classes (P, N).
inline Tensor polarity_scores(const Tensor& H, const Span& expr,
                              const DecoderParams& params) {
  detail::check_expr_span(expr, H.rows());
  const std::size_t d = H.cols();
  Tensor pooled = reshape(max_pool_tokens(H), {1, d});
  Tensor es = reshape(row(H, expr.start), {1, d});
  Tensor ee = reshape(row(H, expr.end), {1, d});
  Tensor feats = concat_cols({pooled, es, ee});
  if (params.polarity_w.rows() != 3 * d) {
    throw dimension_error("polarity head expects dim " +
                          std::to_string(params.polarity_w.rows()) + ", got " +
                          std::to_string(3 * d));
  }
  Tensor logits = add_row_bias(matmul(feats, params.polarity_w),
                               params.polarity_b);
  return softmax(logits, 1);  // 1 x 2
}

inline std::vector<Span> decode_spans(const std::vector<double>& start_probs,
                                      const std::vector<double>& end_probs,
                                      double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw config_error("decode threshold must lie in (0,1), got " +
                       std::to_string(threshold));
  }
  if (start_probs.size() != end_probs.size()) {
    throw dimension_error("decode_spans: " +
                          std::to_string(start_probs.size()) + " start vs " +
                          std::to_string(end_probs.size()) + " end probs");
  }
  std::vector<Span> spans;
  const std::size_t n = start_probs.size();
  std::size_t next_free = 0;  // first index past every emitted span
  for (std::size_t i = 0; i < n; ++i) {
    if (i < next_free) continue;  // inside an emitted span
    if (start_probs[i] < threshold) continue;
    for (std::size_t j = i; j < n; ++j) {
      if (end_probs[j] >= threshold) {
        spans.push_back(Span{i, j});
        next_free = j + 1;
        break;
      }
    }
    // no qualifying end: the start is dropped
  }
  return spans;
}

inline std::vector<Span> decode_spans(const SpanScores& scores,
                                      double threshold) {
  return decode_spans(scores.start.values(), scores.end.values(), threshold);
}

struct PredictedOpinion {
  std::optional<Span> holder;
  std::optional<Span> target;
  Span expression;
  Polarity polarity = Polarity::Positive;
  std::array<double, 2> polarity_probs{0.0, 0.0};
};

struct SentencePredictions {
  std::string sent_id;
  std::vector<PredictedOpinion> opinions;
};

struct TaskLosses {
  Tensor expression;
  Tensor target;
  Tensor holder;
  Tensor polarity;
  Tensor total() const {
    return add(add(expression, target), add(holder, polarity));
  }
};

namespace detail {

inline std::vector<double> span_start_labels(
    const std::vector<std::optional<Span>>& spans, std::size_t n) {
  std::vector<double> y(n, 0.0);
  for (const auto& s : spans) {
    if (s) y[s->start] = 1.0;
  }
  return y;
}

inline std::vector<double> span_end_labels(
    const std::vector<std::optional<Span>>& spans, std::size_t n) {
  std::vector<double> y(n, 0.0);
  for (const auto& s : spans) {
    if (s) y[s->end] = 1.0;
  }
  return y;
}

inline Tensor summed_bce(const SpanScores& scores,
                         const std::vector<std::optional<Span>>& gold,
                         std::size_t n) {
  return add(binary_cross_entropy(scores.start, span_start_labels(gold, n)),
             binary_cross_entropy(scores.end, span_end_labels(gold, n)));
}

}  // namespace detail

// Teacher-forced losses on an encoded sentence. Conditioning always uses the
// gold expression spans; inference-time span decoding never enters here.
inline TaskLosses task_losses_from(const Tensor& H, const Sentence& sentence,
                                   const DecoderParams& params) {
  const std::size_t n = sentence.size();
  if (H.rank() != 2 || H.rows() != n) {
    throw dimension_error("task_losses: encoded shape " +
                          shape_str(H.shape()) + " for sentence \"" +
                          sentence.sent_id + "\" with " + std::to_string(n) +
                          " tokens");
  }
  const std::size_t count = sentence.opinions.size();

  std::vector<std::optional<Span>> gold_expr;
  for (const auto& op : sentence.opinions) gold_expr.emplace_back(op.expression);

  TaskLosses out;
  out.expression = scale(
      detail::summed_bce(expression_scores(H, params), gold_expr, n),
      1.0 / static_cast<double>(n));

  if (count == 0) {
    out.target = Tensor::scalar(0.0);
    out.holder = Tensor::scalar(0.0);
    out.polarity = Tensor::scalar(0.0);
    return out;
  }

  const double pair_norm = 1.0 / static_cast<double>(count * n);
  Tensor target_sum, holder_sum, polarity_sum;
  for (const auto& op : sentence.opinions) {
    Tensor t = detail::summed_bce(
        conditioned_scores(H, op.expression, ConditionedHead::Target, params),
        {op.target}, n);
    Tensor h = detail::summed_bce(
        conditioned_scores(H, op.expression, ConditionedHead::Holder, params),
        {op.holder}, n);
    Tensor p = categorical_cross_entropy(
        polarity_scores(H, op.expression, params),
        op.polarity == Polarity::Positive ? 0 : 1);
    target_sum = target_sum.defined() ? add(target_sum, t) : t;
    holder_sum = holder_sum.defined() ? add(holder_sum, h) : h;
    polarity_sum = polarity_sum.defined() ? add(polarity_sum, p) : p;
  }
  out.target = scale(target_sum, pair_norm);
  out.holder = scale(holder_sum, pair_norm);
  out.polarity = scale(polarity_sum, 1.0 / static_cast<double>(count));
  return out;
}

inline nlohmann::json span_json(const std::optional<Span>& s) {
  if (!s) return nullptr;
  return nlohmann::json::array({s->start, s->end});
}

inline nlohmann::json predictions_to_json(const SentencePredictions& p) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : p.opinions) {
    ops.push_back({{"holder", span_json(op.holder)},
                   {"target", span_json(op.target)},
                   {"expression", span_json(op.expression)},
                   {"polarity", polarity_str(op.polarity)},
                   {"polarity_probs",
                    {op.polarity_probs[0], op.polarity_probs[1]}}});
  }
  return {{"sent_id", p.sent_id}, {"opinions", ops}};
}

inline void write_predictions(const std::vector<SentencePredictions>& preds,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("cannot open prediction file " + path);
  for (const auto& p : preds) out << predictions_to_json(p).dump() << "\n";
}

inline std::vector<SentencePredictions> read_predictions(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open prediction file " + path);
  std::vector<SentencePredictions> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      SentencePredictions p;
      p.sent_id = j.at("sent_id").get<std::string>();
      for (const auto& jo : j.at("opinions")) {
        PredictedOpinion op;
        auto read_span = [](const nlohmann::json& js) -> std::optional<Span> {
          if (js.is_null()) return std::nullopt;
          return Span{js.at(0).get<std::size_t>(), js.at(1).get<std::size_t>()};
        };
        op.holder = read_span(jo.at("holder"));
        op.target = read_span(jo.at("target"));
        auto expr = read_span(jo.at("expression"));
        if (!expr) {
          throw parse_error("prediction line " + std::to_string(line_no) +
                            ": null expression");
        }
        op.expression = *expr;
        op.polarity = polarity_from_str(jo.at("polarity").get<std::string>());
        op.polarity_probs = {jo.at("polarity_probs").at(0).get<double>(),
                             jo.at("polarity_probs").at(1).get<double>()};
        p.opinions.push_back(op);
      }
      preds.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw parse_error("prediction file " + path + " line " +
                        std::to_string(line_no) + ": " + e.what());
    }
  }
  return preds;
}

}  // namespace structsent
