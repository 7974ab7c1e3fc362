// Command-line front end: training, evaluation, prediction, the transfer
// matrix, synthetic bank generation, and offset-format import.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "structsent/structsent.hpp"

namespace {

using namespace structsent;

struct CorpusArg {
  std::string name;
  std::string data_path;
  std::string bank_path;
  std::string dev_path;
};

// NAME=data,bank,dev
CorpusArg parse_corpus_arg(const std::string& raw) {
  const auto eq = raw.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw config_error("--corpus expects NAME=data,bank,dev, got \"" + raw +
                       "\"");
  }
  CorpusArg arg;
  arg.name = raw.substr(0, eq);
  const std::string rest = raw.substr(eq + 1);
  const auto c1 = rest.find(',');
  const auto c2 = c1 == std::string::npos ? std::string::npos
                                          : rest.find(',', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos ||
      rest.find(',', c2 + 1) != std::string::npos) {
    throw config_error("--corpus expects NAME=data,bank,dev, got \"" + raw +
                       "\"");
  }
  arg.data_path = rest.substr(0, c1);
  arg.bank_path = rest.substr(c1 + 1, c2 - c1 - 1);
  arg.dev_path = rest.substr(c2 + 1);
  if (arg.data_path.empty() || arg.bank_path.empty() || arg.dev_path.empty()) {
    throw config_error("--corpus expects NAME=data,bank,dev, got \"" + raw +
                       "\"");
  }
  return arg;
}

int run_train(const std::string& config_path, const std::string& train_path,
              const std::string& dev_path, const std::string& bank_path,
              const std::string& out_path) {
  TrainConfig config = load_config(config_path);
  Corpus train_corpus = load_corpus(train_path, config.max_sequence_length);
  Corpus dev_corpus = load_corpus(dev_path, config.max_sequence_length);

  Corpus both = train_corpus;
  for (const auto& s : dev_corpus.sentences) {
    bool seen = false;
    for (const auto& t : train_corpus.sentences) {
      if (t.sent_id == s.sent_id) seen = true;
    }
    if (!seen) both.sentences.push_back(s);
  }
  EmbeddingBank bank = load_embedding_bank(bank_path, both);

  MultiSeedSummary summary = multi_seed(train_corpus, bank, dev_corpus,
                                        config);
  save_checkpoint(summary.best().checkpoint, out_path);

  nlohmann::json out = summary_to_json(summary);
  out["checkpoint"] = out_path;
  out["best_seed"] = summary.best().seed;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& bank_path, double threshold,
             const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Corpus corpus = load_corpus(data_path,
                              ckpt.config.max_sequence_length);
  EmbeddingBank bank = load_embedding_bank(bank_path, corpus);
  ModelState model = model_from_checkpoint(ckpt);
  const double tau = threshold > 0.0 ? threshold : ckpt.config.threshold;
  MetricsReport report = evaluate(model, corpus, bank, tau);
  nlohmann::json j = report_to_json(report);
  j["threshold"] = tau;
  std::cout << j.dump(2) << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw parse_error("cannot write report to " + out_path);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& data_path,
                const std::string& bank_path, const std::string& out_path,
                double threshold) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Corpus corpus = load_corpus(data_path, ckpt.config.max_sequence_length);
  EmbeddingBank bank = load_embedding_bank(bank_path, corpus);
  ModelState model = model_from_checkpoint(ckpt);
  const double tau = threshold > 0.0 ? threshold : ckpt.config.threshold;
  auto preds = predict_corpus(corpus, bank, model, tau);
  write_predictions(preds, out_path);

  std::size_t opinions = 0;
  for (const auto& p : preds) opinions += p.opinions.size();
  std::cout << nlohmann::json{{"sentences", preds.size()},
                              {"opinions", opinions},
                              {"threshold", tau},
                              {"output", out_path}}
                   .dump(2)
            << "\n";
  return 0;
}

int run_transfer(const std::string& config_path,
                 const std::vector<std::string>& corpus_args,
                 const std::string& out_path) {
  TrainConfig config = load_config(config_path);
  std::vector<CorpusSpec> specs;
  for (const std::string& raw : corpus_args) {
    CorpusArg arg = parse_corpus_arg(raw);
    CorpusSpec spec;
    spec.name = arg.name;
    spec.corpus = load_corpus(arg.data_path, config.max_sequence_length);
    spec.dev = load_corpus(arg.dev_path, config.max_sequence_length);

    Corpus both = spec.corpus;
    for (const auto& s : spec.dev.sentences) {
      bool seen = false;
      for (const auto& t : spec.corpus.sentences) {
        if (t.sent_id == s.sent_id) seen = true;
      }
      if (!seen) both.sentences.push_back(s);
    }
    spec.bank = load_embedding_bank(arg.bank_path, both);
    specs.push_back(std::move(spec));
  }

  auto matrix = transfer_matrix(specs, config);
  nlohmann::json j = transfer_to_json(matrix);
  std::cout << j.dump(2) << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw parse_error("cannot write transfer matrix to " + out_path);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int run_synth_bank(const std::string& data_path, std::size_t models,
                   const std::string& dims_csv, std::uint64_t seed,
                   const std::string& out_path) {
  Corpus corpus = load_corpus(data_path);
  std::vector<std::size_t> dims;
  std::string token;
  std::istringstream stream(dims_csv);
  while (std::getline(stream, token, ',')) {
    try {
      dims.push_back(std::stoul(token));
    } catch (const std::exception&) {
      throw config_error("--dims expects comma-separated integers, got \"" +
                         dims_csv + "\"");
    }
  }
  EmbeddingBank bank = synthetic_bank(corpus, models, dims, seed);
  save_embedding_bank(bank, corpus, out_path);
  std::cout << nlohmann::json{{"sentences", corpus.sentences.size()},
                              {"models", models},
                              {"dims", dims},
                              {"output", out_path}}
                   .dump(2)
            << "\n";
  return 0;
}

int run_import(const std::string& data_path, const std::string& name,
               const std::string& language, std::size_t max_len,
               const std::string& out_path) {
  LoadStats stats;
  Corpus corpus = import_offset_format(data_path, name, language, max_len,
                                       &stats);
  save_corpus(corpus, out_path);
  std::cout << nlohmann::json{
                   {"sentences", corpus.sentences.size()},
                   {"truncated_sentences", stats.truncated_sentences},
                   {"dropped_opinions", stats.dropped_opinions},
                   {"dropped_neutral", stats.dropped_neutral},
                   {"multi_fragment_reduced", stats.multi_fragment_reduced},
                   {"dropped_empty_expression",
                    stats.dropped_empty_expression},
                   {"fallback_trees", stats.fallback_trees},
                   {"output", out_path}}
                   .dump(2)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured sentiment analysis over fused multilingual "
               "embeddings"};
  app.require_subcommand(1);

  std::string config_path, train_path, dev_path, bank_path, out_path;
  std::string ckpt_path, data_path, name, language, dims_csv;
  std::vector<std::string> corpus_args;
  double threshold = 0.0;
  std::size_t models = 0, max_len = kDefaultMaxSequenceLength;
  std::uint64_t seed = 0;

  CLI::App* train = app.add_subcommand("train", "Train with multiple seeds "
                                                "and keep the best "
                                                "checkpoint");
  train->add_option("--config", config_path)->required();
  train->add_option("--train", train_path)->required();
  train->add_option("--dev", dev_path)->required();
  train->add_option("--bank", bank_path)->required();
  train->add_option("--out", out_path)->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ckpt_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--bank", bank_path)->required();
  eval_cmd->add_option("--threshold", threshold);
  eval_cmd->add_option("--out", out_path);

  CLI::App* predict = app.add_subcommand("predict", "Write predictions as "
                                                    "JSON lines");
  predict->add_option("--checkpoint", ckpt_path)->required();
  predict->add_option("--data", data_path)->required();
  predict->add_option("--bank", bank_path)->required();
  predict->add_option("--out", out_path)->required();
  predict->add_option("--threshold", threshold);

  CLI::App* transfer = app.add_subcommand("transfer", "Train per corpus and "
                                                      "cross-evaluate");
  transfer->add_option("--config", config_path)->required();
  transfer->add_option("--corpus", corpus_args, "NAME=data,bank,dev")
      ->required();
  transfer->add_option("--out", out_path);

  CLI::App* synth = app.add_subcommand("synth-bank", "Generate a "
                                                     "deterministic "
                                                     "synthetic bank");
  synth->add_option("--data", data_path)->required();
  synth->add_option("--models", models)->required();
  synth->add_option("--dims", dims_csv)->required();
  synth->add_option("--seed", seed)->required();
  synth->add_option("--out", out_path)->required();

  CLI::App* import_cmd = app.add_subcommand("import", "Convert offset-format "
                                                      "annotations");
  import_cmd->add_option("--data", data_path)->required();
  import_cmd->add_option("--name", name)->required();
  import_cmd->add_option("--language", language)->required();
  import_cmd->add_option("--max-length", max_len);
  import_cmd->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return run_train(config_path, train_path, dev_path, bank_path, out_path);
    }
    if (eval_cmd->parsed()) {
      return run_eval(ckpt_path, data_path, bank_path, threshold, out_path);
    }
    if (predict->parsed()) {
      return run_predict(ckpt_path, data_path, bank_path, out_path, threshold);
    }
    if (transfer->parsed()) {
      return run_transfer(config_path, corpus_args, out_path);
    }
    if (synth->parsed()) {
      return run_synth_bank(data_path, models, dims_csv, seed, out_path);
    }
    if (import_cmd->parsed()) {
      return run_import(data_path, name, language, max_len, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
