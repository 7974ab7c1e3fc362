#pragma once

// Full model assembly: parameter initialization, the fuse -> perturb ->
// dropout -> gcn encoding path, teacher-forced losses, and inference.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "structsent/config.hpp"
#include "structsent/corpus.hpp"
#include "structsent/decoder.hpp"
#include "structsent/error.hpp"
#include "structsent/fusion.hpp"
#include "structsent/gcn.hpp"
#include "structsent/rng.hpp"
#include "structsent/tensor.hpp"

namespace structsent {

struct ModelState {
  TrainConfig config;
  std::vector<std::size_t> model_dims;
  AttentionParams attention;
  GcnStack gcn;
  DecoderParams decoder;

  // Stable name -> tensor listing; the order doubles as the optimizer's
  // parameter order and the checkpoint layout.
  std::vector<std::pair<std::string, Tensor>> named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t k = 0; k < attention.models(); ++k) {
      const std::string sk = std::to_string(k);
      out.emplace_back("fuse.align." + sk, attention.align[k]);
      out.emplace_back("fuse.proj." + sk, attention.proj[k]);
      out.emplace_back("fuse.bias." + sk, attention.bias[k]);
    }
    out.emplace_back("fuse.score", attention.score);
    for (std::size_t l = 0; l < gcn.weights.size(); ++l) {
      out.emplace_back("gcn.w." + std::to_string(l), gcn.weights[l]);
    }
    for (std::size_t l = 0; l < gcn.biases.size(); ++l) {
      out.emplace_back("gcn.b." + std::to_string(l), gcn.biases[l]);
    }
    auto head = [&out](const std::string& name, const HeadParams& h) {
      out.emplace_back(name + ".w", h.w);
      out.emplace_back(name + ".b", h.b);
    };
    head("dec.exp_start", decoder.exp_start);
    head("dec.exp_end", decoder.exp_end);
    head("dec.tgt_start", decoder.tgt_start);
    head("dec.tgt_end", decoder.tgt_end);
    head("dec.hld_start", decoder.hld_start);
    head("dec.hld_end", decoder.hld_end);
    out.emplace_back("dec.polarity.w", decoder.polarity_w);
    out.emplace_back("dec.polarity.b", decoder.polarity_b);
    return out;
  }
};

namespace detail {

inline Tensor uniform_matrix(Shape shape, std::size_t fan_in,
                             std::mt19937_64& gen) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = uniform_in(gen, -bound, bound);
  return Tensor::parameter(std::move(shape), std::move(v));
}

inline Tensor zero_vector(std::size_t len) {
  return Tensor::parameter({len}, std::vector<double>(len, 0.0));
}

}  // namespace detail

// Deterministic initialization: matrices drawn uniform within 1/sqrt(fan_in)
// from a generator seeded by `seed`, biases zero. Alignment maps start as
// the identity whenever a model already has the fused width. The draw order
// is fixed (attention per model, score, gcn layers, decoder heads), so equal
// seeds give bitwise equal parameters.
inline ModelState init_model(const TrainConfig& config,
                             const std::vector<std::size_t>& model_dims,
                             std::uint64_t seed) {
  config.validate();
  if (model_dims.empty()) {
    throw config_error("init_model: need at least one embedding model");
  }
  for (std::size_t dk : model_dims) {
    if (dk == 0) throw config_error("init_model: embedding dim 0");
  }
  const std::size_t d = config.d;
  const std::size_t d_attn = config.d_attn;
  std::mt19937_64 gen(mix_seed(seed, fnv1a("model-init")));

  ModelState m;
  m.config = config;
  m.model_dims = model_dims;
  for (std::size_t dk : model_dims) {
    if (dk == d) {
      std::vector<double> eye(d * d, 0.0);
      for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
      m.attention.align.push_back(Tensor::parameter({d, d}, std::move(eye)));
    } else {
      m.attention.align.push_back(detail::uniform_matrix({dk, d}, dk, gen));
    }
    m.attention.proj.push_back(detail::uniform_matrix({dk, d_attn}, dk, gen));
    m.attention.bias.push_back(detail::zero_vector(d_attn));
  }
  m.attention.score = detail::uniform_matrix({d_attn}, d_attn, gen);

  for (std::size_t l = 0; l < static_cast<std::size_t>(config.gcn_layers);
       ++l) {
    m.gcn.weights.push_back(detail::uniform_matrix({d, d}, d, gen));
    if (config.gcn_bias) m.gcn.biases.push_back(detail::zero_vector(d));
  }

  auto head = [&gen](std::size_t fan_in) {
    return HeadParams{detail::uniform_matrix({fan_in}, fan_in, gen),
                      detail::zero_vector(1)};
  };
  m.decoder.exp_start = head(d);
  m.decoder.exp_end = head(d);
  m.decoder.tgt_start = head(3 * d);
  m.decoder.tgt_end = head(3 * d);
  m.decoder.hld_start = head(3 * d);
  m.decoder.hld_end = head(3 * d);
  m.decoder.polarity_w = detail::uniform_matrix({3 * d, 2}, 3 * d, gen);
  m.decoder.polarity_b = detail::zero_vector(2);
  return m;
}

// Inverted dropout mask: each entry is 0 with probability rate, else
// 1/(1-rate), so the expected activation is unchanged.
inline Tensor make_dropout_mask(std::size_t rows, std::size_t cols,
                                double rate, std::mt19937_64& gen) {
  if (rate < 0.0 || rate >= 1.0) {
    throw config_error("dropout rate must lie in [0,1), got " +
                       std::to_string(rate));
  }
  std::vector<double> v(rows * cols);
  const double keep = 1.0 / (1.0 - rate);
  for (double& x : v) x = uniform_unit(gen) < rate ? 0.0 : keep;
  return Tensor::constant({rows, cols}, std::move(v));
}

struct Encoded {
  Tensor fused;  // clean fused embeddings, pre-perturbation and pre-dropout
  Tensor H;      // token representations after the graph layers
};

// fuse -> (+ perturbation) -> (x dropout mask) -> gcn. `fused` in the result
// is the tensor whose gradient drives the adversarial direction, so it is
// returned before either optional transform.
inline Encoded encode(const Sentence& sentence, const BankEntry& entry,
                      const ModelState& model,
                      const Tensor* dropout_mask = nullptr,
                      const Tensor* perturbation = nullptr) {
  Tensor fused = fuse(entry, model.model_dims, model.attention);
  if (fused.rows() != sentence.size()) {
    throw dimension_error("encode: bank entry has " +
                          std::to_string(fused.rows()) + " rows for \"" +
                          sentence.sent_id + "\" with " +
                          std::to_string(sentence.size()) + " tokens");
  }
  Tensor h = fused;
  if (perturbation) h = perturb(h, *perturbation);
  if (dropout_mask) h = mul(h, *dropout_mask);
  DependencyGraph graph = build_graph(sentence.heads);
  return {fused, gcn_forward(h, graph, model.gcn)};
}

inline TaskLosses task_losses(const Sentence& sentence, const BankEntry& entry,
                              const ModelState& model) {
  return task_losses_from(encode(sentence, entry, model).H, sentence,
                          model.decoder);
}

inline std::vector<PredictedOpinion> predict_sentence(const Sentence& sentence,
                                                      const BankEntry& entry,
                                                      const ModelState& model,
                                                      double threshold) {
  Tensor H = encode(sentence, entry, model).H;
  std::vector<PredictedOpinion> out;
  for (const Span& expr : decode_spans(expression_scores(H, model.decoder),
                                       threshold)) {
    std::vector<Span> targets = decode_spans(
        conditioned_scores(H, expr, ConditionedHead::Target, model.decoder),
        threshold);
    std::vector<Span> holders = decode_spans(
        conditioned_scores(H, expr, ConditionedHead::Holder, model.decoder),
        threshold);
    Tensor probs = polarity_scores(H, expr, model.decoder);

    PredictedOpinion base;
    base.expression = expr;
    base.holder = holders.empty() ? std::nullopt
                                  : std::optional<Span>(holders.front());
    base.polarity_probs = {probs.values()[0], probs.values()[1]};
    base.polarity = probs.values()[0] >= probs.values()[1]
                        ? Polarity::Positive
                        : Polarity::Negative;
    if (targets.empty()) {
      base.target = std::nullopt;
      out.push_back(base);
    } else {
      for (const Span& t : targets) {
        PredictedOpinion op = base;
        op.target = t;
        out.push_back(op);
      }
    }
  }
  return out;
}

inline std::vector<SentencePredictions> predict_corpus(
    const Corpus& corpus, const EmbeddingBank& bank, const ModelState& model,
    double threshold) {
  check_bank_covers(bank, corpus);
  std::vector<SentencePredictions> out;
  for (const auto& sent : corpus.sentences) {
    out.push_back({sent.sent_id,
                   predict_sentence(sent, bank.entry(sent.sent_id), model,
                                    threshold)});
  }
  return out;
}

}  // namespace structsent
