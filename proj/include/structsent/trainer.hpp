#pragma once

// The joint adversarial training loop. Each step runs a clean forward over
// the batch, reads the task-loss gradient at every sentence's fused
// embedding matrix, re-runs the forward on the perturbed embeddings with the
// same dropout masks, and takes one Adam step on L_task + lambda * L_adv.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "structsent/config.hpp"
#include "structsent/corpus.hpp"
#include "structsent/error.hpp"
#include "structsent/fusion.hpp"
#include "structsent/metrics.hpp"
#include "structsent/model.hpp"
#include "structsent/rng.hpp"
#include "structsent/tensor.hpp"

namespace structsent {

// Deterministic epoch shuffle: a pure function of (seed, epoch, n), so two
// runs with equal seeds visit sentences in the same order.
inline std::vector<std::size_t> shuffled_indices(std::uint64_t seed, int epoch,
                                                 std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 gen(
      mix_seed(seed, mix_seed(fnv1a("shuffle"),
                              static_cast<std::uint64_t>(epoch))));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[gen() % i]);
  }
  return idx;
}

struct TrainSession {
  ModelState model;
  Adam optimizer;
  std::mt19937_64 mask_gen;
  int epoch = 0;
  std::size_t step = 0;

  TrainSession(const TrainConfig& config,
               const std::vector<std::size_t>& model_dims, std::uint64_t seed)
      : model(init_model(config, model_dims, seed)),
        optimizer(model.named_params(), config.learning_rate),
        mask_gen(mix_seed(seed, fnv1a("dropout"))) {}
};

struct StepResult {
  double task = 0.0;         // batch-mean clean loss
  double adversarial = 0.0;  // batch-mean loss on perturbed embeddings
  double combined = 0.0;     // task + lambda * adversarial
};

using TrainBatch = std::vector<std::pair<const Sentence*, const BankEntry*>>;

namespace detail {

inline void require_finite_params(const ModelState& model, int epoch,
                                  std::size_t step) {
  for (const auto& [name, tensor] : model.named_params()) {
    for (double v : tensor.values()) {
      if (!std::isfinite(v)) {
        throw divergence_error("epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(step) + ": parameter " + name +
                               " became non-finite");
      }
    }
  }
}

}  // namespace detail

inline StepResult train_step(TrainSession& session, const TrainBatch& batch) {
  if (batch.empty()) throw empty_input_error("train_step: empty batch");
  const TrainConfig& config = session.model.config;
  const AdversarialConfig adv = config.adversarial();
  session.step += 1;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  std::vector<Encoded> clean;
  std::vector<Tensor> masks;   // undefined tensor when dropout is off
  Tensor task_sum;
  for (const auto& [sent, entry] : batch) {
    Tensor mask;
    if (config.dropout > 0.0) {
      mask = make_dropout_mask(sent->size(), config.d, config.dropout,
                               session.mask_gen);
    }
    Encoded enc = encode(*sent, *entry, session.model,
                         mask.defined() ? &mask : nullptr);
    Tensor loss = task_losses_from(enc.H, *sent, session.model.decoder).total();
    task_sum = task_sum.defined() ? add(task_sum, loss) : loss;
    clean.push_back(enc);
    masks.push_back(mask);
  }
  Tensor task_mean = scale(task_sum, inv_b);

  StepResult result;
  result.task = task_mean.value();
  if (!std::isfinite(result.task)) {
    throw divergence_error("epoch " + std::to_string(session.epoch) +
                           ", step " + std::to_string(session.step) +
                           ": task loss is not finite");
  }
  backward(task_mean);

  result.combined = result.task;
  if (adv.enabled && adv.lambda > 0.0) {
    Tensor adv_sum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& [sent, entry] = batch[i];
      Tensor g = Tensor::constant(clean[i].fused.shape(),
                                  clean[i].fused.grad());
      Tensor r = adversarial_perturbation(g, adv.epsilon);
      Encoded enc = encode(*sent, *entry, session.model,
                           masks[i].defined() ? &masks[i] : nullptr, &r);
      Tensor loss =
          task_losses_from(enc.H, *sent, session.model.decoder).total();
      adv_sum = adv_sum.defined() ? add(adv_sum, loss) : loss;
    }
    Tensor adv_mean = scale(adv_sum, inv_b);
    result.adversarial = adv_mean.value();
    result.combined = result.task + adv.lambda * result.adversarial;
    if (!std::isfinite(result.combined)) {
      throw divergence_error("epoch " + std::to_string(session.epoch) +
                             ", step " + std::to_string(session.step) +
                             ": combined loss is not finite");
    }
    backward(scale(adv_mean, adv.lambda));
  }

  session.optimizer.step();
  detail::require_finite_params(session.model, session.epoch, session.step);
  return result;
}

struct CheckpointTensor {
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  TrainConfig config;
  std::uint64_t seed = 0;
  int epoch = 0;
  double dev_targeted_f1 = 0.0;
  std::map<std::string, CheckpointTensor> params;
};

inline Checkpoint checkpoint_from_model(const ModelState& model,
                                        std::uint64_t seed, int epoch,
                                        double dev_targeted_f1) {
  Checkpoint c;
  c.config = model.config;
  c.seed = seed;
  c.epoch = epoch;
  c.dev_targeted_f1 = dev_targeted_f1;
  for (const auto& [name, tensor] : model.named_params()) {
    c.params.emplace(name, CheckpointTensor{tensor.shape(), tensor.values()});
  }
  return c;
}

inline ModelState model_from_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::size_t> dims;
  for (std::size_t k = 0;; ++k) {
    auto it = ckpt.params.find("fuse.align." + std::to_string(k));
    if (it == ckpt.params.end()) break;
    if (it->second.shape.size() != 2) {
      throw parse_error("checkpoint: fuse.align." + std::to_string(k) +
                        " is not a matrix");
    }
    dims.push_back(it->second.shape[0]);
  }
  if (dims.empty()) {
    throw parse_error("checkpoint: no fuse.align.* parameters");
  }
  ModelState model = init_model(ckpt.config, dims, 0);
  auto named = model.named_params();
  if (named.size() != ckpt.params.size()) {
    throw parse_error("checkpoint: holds " +
                      std::to_string(ckpt.params.size()) +
                      " parameters, model expects " +
                      std::to_string(named.size()));
  }
  for (auto& [name, tensor] : named) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end()) {
      throw parse_error("checkpoint: missing parameter " + name);
    }
    if (it->second.shape != tensor.shape() ||
        it->second.values.size() != tensor.size()) {
      throw parse_error("checkpoint: parameter " + name + " has shape " +
                        shape_str(it->second.shape) + ", expected " +
                        shape_str(tensor.shape()));
    }
    tensor.values_mut() = it->second.values;
  }
  return model;
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : c.params) {
    params[name] = {{"shape", t.shape}, {"values", t.values}};
  }
  return {{"config", config_to_json(c.config)},
          {"seed", c.seed},
          {"epoch", c.epoch},
          {"dev_targeted_f1", c.dev_targeted_f1},
          {"params", params}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    Checkpoint c;
    c.config = config_from_json(j.at("config"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.epoch = j.at("epoch").get<int>();
    c.dev_targeted_f1 = j.at("dev_targeted_f1").get<double>();
    for (const auto& [name, jt] : j.at("params").items()) {
      CheckpointTensor t;
      jt.at("shape").get_to(t.shape);
      jt.at("values").get_to(t.values);
      if (shape_size(t.shape) != t.values.size()) {
        throw parse_error("checkpoint: parameter " + name + " has " +
                          std::to_string(t.values.size()) +
                          " values for shape " + shape_str(t.shape));
      }
      c.params.emplace(name, std::move(t));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("cannot open checkpoint file " + path);
  out << checkpoint_to_json(c).dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open checkpoint file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error("checkpoint " + path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

struct TrainLog {
  std::vector<double> step_losses;    // combined loss per optimizer step
  std::vector<double> dev_targeted;   // dev targeted F1 per epoch (0 = init)
};

// Epoch loop with best-dev selection: the checkpoint with the highest dev
// targeted F1 wins, earliest epoch on ties. Epoch 0 is the initialized
// model, so epochs = 0 returns it with its dev score recorded.
inline Checkpoint train(const Corpus& train_corpus, const EmbeddingBank& bank,
                        const Corpus& dev_corpus, const TrainConfig& config,
                        std::uint64_t seed, TrainLog* log = nullptr) {
  config.validate();
  validate_corpus(train_corpus);
  validate_corpus(dev_corpus);
  if (train_corpus.sentences.empty()) {
    throw empty_input_error("train: empty training corpus");
  }
  if (dev_corpus.sentences.empty()) {
    throw config_error("train: empty dev corpus");
  }
  check_bank_covers(bank, train_corpus);
  check_bank_covers(bank, dev_corpus);

  TrainSession session(config, bank.model_dims, seed);

  auto dev_f1 = [&]() {
    return evaluate(session.model, dev_corpus, bank, config.threshold)
        .targeted.f1();
  };

  double best_f1 = dev_f1();
  Checkpoint best = checkpoint_from_model(session.model, seed, 0, best_f1);
  if (log) log->dev_targeted.push_back(best_f1);

  const std::size_t n = train_corpus.sentences.size();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    session.epoch = epoch;
    std::vector<std::size_t> order = shuffled_indices(seed, epoch, n);
    for (std::size_t at = 0; at < n; at += config.batch_size) {
      TrainBatch batch;
      const std::size_t stop = std::min(n, at + config.batch_size);
      for (std::size_t i = at; i < stop; ++i) {
        const Sentence& sent = train_corpus.sentences[order[i]];
        batch.emplace_back(&sent, &bank.entry(sent.sent_id));
      }
      StepResult r = train_step(session, batch);
      if (log) log->step_losses.push_back(r.combined);
    }
    const double f1 = dev_f1();
    if (log) log->dev_targeted.push_back(f1);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = checkpoint_from_model(session.model, seed, epoch, f1);
    }
  }
  return best;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over seeds
};

struct SeedRun {
  std::uint64_t seed = 0;
  Checkpoint checkpoint;
  MetricsReport dev_metrics;
};

struct MultiSeedSummary {
  std::vector<SeedRun> runs;
  MeanStd expression_f1, target_f1, holder_f1, targeted_f1;

  // Highest dev targeted F1; earliest seed in config order on ties.
  const SeedRun& best() const {
    if (runs.empty()) throw empty_input_error("multi_seed: no runs");
    std::size_t at = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
      if (runs[i].checkpoint.dev_targeted_f1 >
          runs[at].checkpoint.dev_targeted_f1) {
        at = i;
      }
    }
    return runs[at];
  }
};

namespace detail {

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return m;
}

}  // namespace detail

inline MultiSeedSummary multi_seed(const Corpus& train_corpus,
                                   const EmbeddingBank& bank,
                                   const Corpus& dev_corpus,
                                   const TrainConfig& config) {
  config.validate();
  MultiSeedSummary summary;
  std::vector<double> exp_f1, tgt_f1, hld_f1, targeted;
  for (std::uint64_t seed : config.seeds) {
    SeedRun run;
    run.seed = seed;
    run.checkpoint = train(train_corpus, bank, dev_corpus, config, seed);
    ModelState model = model_from_checkpoint(run.checkpoint);
    run.dev_metrics = evaluate(model, dev_corpus, bank, config.threshold);
    exp_f1.push_back(run.dev_metrics.expression_f1());
    tgt_f1.push_back(run.dev_metrics.target_f1());
    hld_f1.push_back(run.dev_metrics.holder_f1());
    targeted.push_back(run.dev_metrics.targeted_f1());
    summary.runs.push_back(std::move(run));
  }
  summary.expression_f1 = detail::mean_std(exp_f1);
  summary.target_f1 = detail::mean_std(tgt_f1);
  summary.holder_f1 = detail::mean_std(hld_f1);
  summary.targeted_f1 = detail::mean_std(targeted);
  return summary;
}

inline nlohmann::json summary_to_json(const MultiSeedSummary& s) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : s.runs) {
    runs.push_back({{"seed", run.seed},
                    {"best_epoch", run.checkpoint.epoch},
                    {"dev_targeted_f1", run.checkpoint.dev_targeted_f1},
                    {"dev_metrics", report_to_json(run.dev_metrics)}});
  }
  auto ms = [](const MeanStd& m) {
    return nlohmann::json{{"mean", m.mean}, {"stddev", m.stddev}};
  };
  return {{"runs", runs},
          {"expression_f1", ms(s.expression_f1)},
          {"target_f1", ms(s.target_f1)},
          {"holder_f1", ms(s.holder_f1)},
          {"targeted_f1", ms(s.targeted_f1)}};
}

}  // namespace structsent
