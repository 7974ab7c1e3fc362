#pragma once

// Cross-lingual transfer matrix: train on each corpus with its own bank,
// then evaluate every trained model on every corpus through that corpus's
// bank. Off-diagonal cells measure zero-shot transfer; the diagonal is the
// supervised setting.

#include <string>
#include <vector>

#include <json.hpp>

#include "structsent/config.hpp"
#include "structsent/corpus.hpp"
#include "structsent/error.hpp"
#include "structsent/metrics.hpp"
#include "structsent/trainer.hpp"

namespace structsent {

struct CorpusSpec {
  std::string name;
  Corpus corpus;       // training + transfer-evaluation data
  EmbeddingBank bank;  // embeddings for every sentence of `corpus` and `dev`
  Corpus dev;          // model selection set for training runs
};

struct TransferCell {
  std::string source;
  std::string target;
  // Counts pooled over the seeds (micro aggregation), with F1 recomputed
  // from the pooled counts.
  MetricsReport pooled;
  // Per-seed targeted F1 summary (macro aggregation, paper-style mean).
  MeanStd targeted_f1;
  std::size_t seed_count = 0;
};

namespace detail {

inline void pool_counts(MetricCounts& into, const MetricCounts& from) {
  into.tp += from.tp;
  into.predicted += from.predicted;
  into.gold += from.gold;
}

inline void pool_report(MetricsReport& into, const MetricsReport& from) {
  pool_counts(into.expression, from.expression);
  pool_counts(into.target, from.target);
  pool_counts(into.holder, from.holder);
  pool_counts(into.targeted, from.targeted);
  into.gold_null_targets += from.gold_null_targets;
  into.predicted_null_targets += from.predicted_null_targets;
}

}  // namespace detail

inline std::vector<std::vector<TransferCell>> transfer_matrix(
    const std::vector<CorpusSpec>& specs, const TrainConfig& config) {
  if (specs.empty()) {
    throw empty_input_error("transfer_matrix: no corpora");
  }
  config.validate();
  for (const auto& spec : specs) {
    if (spec.bank.model_dims != specs[0].bank.model_dims) {
      throw alignment_error("transfer_matrix: corpus \"" + spec.name +
                            "\" bank dims differ from \"" + specs[0].name +
                            "\"");
    }
  }

  std::vector<std::vector<TransferCell>> matrix;
  for (const auto& source : specs) {
    MultiSeedSummary summary =
        multi_seed(source.corpus, source.bank, source.dev, config);
    std::vector<ModelState> models;
    for (const auto& run : summary.runs) {
      models.push_back(model_from_checkpoint(run.checkpoint));
    }

    std::vector<TransferCell> row;
    for (const auto& target : specs) {
      TransferCell cell;
      cell.source = source.name;
      cell.target = target.name;
      cell.seed_count = models.size();
      std::vector<double> targeted;
      for (const ModelState& model : models) {
        MetricsReport report =
            evaluate(model, target.corpus, target.bank, config.threshold);
        detail::pool_report(cell.pooled, report);
        targeted.push_back(report.targeted_f1());
      }
      cell.targeted_f1 = detail::mean_std(targeted);
      row.push_back(std::move(cell));
    }
    matrix.push_back(std::move(row));
  }
  return matrix;
}

inline nlohmann::json transfer_to_json(
    const std::vector<std::vector<TransferCell>>& matrix) {
  nlohmann::json cells = nlohmann::json::array();
  nlohmann::json names = nlohmann::json::array();
  for (const auto& row : matrix) {
    if (!row.empty()) names.push_back(row.front().source);
    nlohmann::json jrow = nlohmann::json::array();
    for (const auto& cell : row) {
      jrow.push_back({{"source", cell.source},
                      {"target", cell.target},
                      {"seed_count", cell.seed_count},
                      {"targeted_f1",
                       {{"mean", cell.targeted_f1.mean},
                        {"stddev", cell.targeted_f1.stddev}}},
                      {"pooled", report_to_json(cell.pooled)}});
    }
    cells.push_back(std::move(jrow));
  }
  return {{"corpora", names}, {"cells", cells}};
}

}  // namespace structsent
