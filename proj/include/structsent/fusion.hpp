#pragma once

// Word-level attention fusion over K frozen embedding models, and the
// fast-gradient adversarial perturbation applied at the fused boundary.
//
// For word i, model k contributes a score v_a . tanh(e_i^k W_a^k + b_a^k)
// computed from its raw embedding; the K scores are softmax-normalized into
// attention weights, and the fused vector is the weighted sum of the
// dimension-aligned embeddings align_k(e_i^k).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "structsent/corpus.hpp"
#include "structsent/error.hpp"
#include "structsent/tensor.hpp"

namespace structsent {

struct AdversarialConfig {
  double epsilon = 0.05;
  double lambda = 1.0;
  bool enabled = true;
};

// Per-model score projections with a shared scoring vector, plus per-model
// alignment maps d_k -> d for the value path.
struct AttentionParams {
  std::vector<Tensor> align;  // K matrices, d_k x d
  std::vector<Tensor> proj;   // K matrices, d_k x d_attn
  std::vector<Tensor> bias;   // K vectors, d_attn
  Tensor score;               // shared vector, d_attn

  std::size_t models() const { return align.size(); }
  std::size_t fused_dim() const { return align.empty() ? 0 : align[0].cols(); }
};

namespace detail {

inline void check_entry(const BankEntry& entry,
                        const std::vector<std::size_t>& model_dims,
                        const AttentionParams& params) {
  if (entry.models.size() != model_dims.size() ||
      params.models() != model_dims.size() ||
      params.proj.size() != model_dims.size() ||
      params.bias.size() != model_dims.size()) {
    throw dimension_error(
        "fuse: entry has " + std::to_string(entry.models.size()) +
        " models, dims list " + std::to_string(model_dims.size()) +
        ", params " + std::to_string(params.models()));
  }
  if (model_dims.empty()) {
    throw empty_input_error("fuse: no embedding models");
  }
  const std::size_t rows = entry.models[0].size() / model_dims[0];
  for (std::size_t k = 0; k < model_dims.size(); ++k) {
    if (model_dims[k] == 0 || entry.models[k].size() % model_dims[k] != 0 ||
        entry.models[k].size() / model_dims[k] != rows) {
      throw dimension_error("fuse: model " + std::to_string(k) + " holds " +
                            std::to_string(entry.models[k].size()) +
                            " values, inconsistent with dim " +
                            std::to_string(model_dims[k]) + " and " +
                            std::to_string(rows) + " rows");
    }
  }
  if (rows == 0) {
    throw empty_input_error("fuse: entry has no token rows");
  }
}

}  // namespace detail

struct FuseResult {
  Tensor fused;      // |x| x d
  Tensor attention;  // |x| x K, rows sum to 1
};

inline FuseResult fuse_with_attention(const BankEntry& entry,
                                      const std::vector<std::size_t>&
                                          model_dims,
                                      const AttentionParams& params) {
  detail::check_entry(entry, model_dims, params);
  const std::size_t K = model_dims.size();
  const std::size_t n = entry.models[0].size() / model_dims[0];
  const std::size_t d_attn = params.score.size();

  std::vector<Tensor> aligned;
  std::vector<Tensor> scores;
  Tensor score_col = reshape(params.score, {d_attn, 1});
  for (std::size_t k = 0; k < K; ++k) {
    Tensor raw = Tensor::constant({n, model_dims[k]}, entry.models[k]);
    aligned.push_back(matmul(raw, params.align[k]));
    Tensor hidden = activation(
        add_row_bias(matmul(raw, params.proj[k]), params.bias[k]),
        Activation::Tanh);
    scores.push_back(matmul(hidden, score_col));  // n x 1
  }
  Tensor attention = softmax(concat_cols(scores), 1);  // n x K
  Tensor fused = scale_rows(aligned[0], col(attention, 0));
  for (std::size_t k = 1; k < K; ++k) {
    fused = add(fused, scale_rows(aligned[k], col(attention, k)));
  }
  return {fused, attention};
}

inline Tensor fuse(const BankEntry& entry,
                   const std::vector<std::size_t>& model_dims,
                   const AttentionParams& params) {
  return fuse_with_attention(entry, model_dims, params).fused;
}

// r_adv = epsilon * g / ||g||_2 with the norm taken over the whole sentence
// matrix. The result is a constant: no gradient flows through it. A
// vanishing gradient yields the zero perturbation.
inline Tensor adversarial_perturbation(const Tensor& grad_wrt_fused,
                                       double epsilon) {
  detail::require_defined(grad_wrt_fused, "adversarial_perturbation");
  double norm_sq = 0.0;
  for (double v : grad_wrt_fused.values()) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  std::vector<double> r(grad_wrt_fused.size(), 0.0);
  if (norm >= 1e-12) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = epsilon * grad_wrt_fused.values()[i] / norm;
    }
  }
  return Tensor::constant(grad_wrt_fused.shape(), std::move(r));
}

// e + r_adv. The perturbation enters as data, so the gradient reaches the
// fused embeddings only.
inline Tensor perturb(const Tensor& fused, const Tensor& r_adv) {
  detail::require_defined(fused, "perturb");
  detail::require_defined(r_adv, "perturb");
  if (fused.shape() != r_adv.shape()) {
    throw dimension_error("perturb: shape mismatch " +
                          shape_str(fused.shape()) + " vs " +
                          shape_str(r_adv.shape()));
  }
  return add(fused, r_adv);
}

}  // namespace structsent
