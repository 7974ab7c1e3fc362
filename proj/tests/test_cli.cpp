// End-to-end runs of the command-line tool: pipeline smoke, determinism,
// import round trip, and nonzero exits on bad input.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "structsent/corpus.hpp"
#include "structsent/decoder.hpp"
#include "structsent/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kCli = STRUCTSENT_CLI_PATH;

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "structsent_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Runs the tool, captures stdout into out_file, returns true on exit 0.
bool run(const std::string& args, const fs::path& out_file) {
  const std::string cmd =
      kCli + " " + args + " > " + out_file.string() + " 2> " +
      (out_file.string() + ".err");
  return std::system(cmd.c_str()) == 0;
}

const char* kCorpusJson = R"({
  "name": "smoke", "language": "en",
  "sentences": [
    {"sent_id": "a1", "tokens": ["I", "love", "tea"], "heads": [1, -1, 1],
     "opinions": [{"holder": [0, 0], "target": [2, 2], "expression": [1, 1], "polarity": "P"}]},
    {"sent_id": "a2", "tokens": ["We", "hate", "rain"], "heads": [1, -1, 1],
     "opinions": [{"holder": [0, 0], "target": [2, 2], "expression": [1, 1], "polarity": "N"}]},
    {"sent_id": "a3", "tokens": ["They", "like", "snow"], "heads": [1, -1, 1],
     "opinions": [{"holder": [0, 0], "target": [2, 2], "expression": [1, 1], "polarity": "P"}]},
    {"sent_id": "a4", "tokens": ["Dogs", "dislike", "cats"], "heads": [1, -1, 1],
     "opinions": [{"holder": [0, 0], "target": [2, 2], "expression": [1, 1], "polarity": "N"}]}
  ]
})";

const char* kConfigJson = R"({
  "learning_rate": 0.005, "epochs": 2, "seeds": [3], "dropout": 0.0,
  "gcn_layers": 2, "d": 4, "d_attn": 3, "batch_size": 4
})";

const char* kOffsetsJson = R"([
  {"sent_id": "b1", "text": "The food was great",
   "opinions": [{"Source": [[], []], "Target": [["The food"], ["0:8"]],
                 "Polar_expression": [["great"], ["13:18"]], "Polarity": "Positive"}]},
  {"sent_id": "b2", "text": "Service was slow and rude",
   "opinions": [{"Source": [[], []], "Target": [["Service"], ["0:7"]],
                 "Polar_expression": [["slow", "rude"], ["12:16", "21:25"]], "Polarity": "Negative"},
                {"Source": [[], []], "Target": [[], []],
                 "Polar_expression": [["slow"], ["12:16"]], "Polarity": "Neutral"}]}
])";

}  // namespace

TEST_CASE("synth-bank, train, eval, and predict chain together", "[cli]") {
  const fs::path dir = work_dir() / "pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir / "corpus.json", kCorpusJson);
  write_file(dir / "config.json", kConfigJson);

  REQUIRE(run("synth-bank --data " + (dir / "corpus.json").string() +
                  " --models 2 --dims 3,5 --seed 11 --out " +
                  (dir / "bank.json").string(),
              dir / "synth.out"));
  REQUIRE(fs::exists(dir / "bank.json"));

  REQUIRE(run("train --config " + (dir / "config.json").string() +
                  " --train " + (dir / "corpus.json").string() + " --dev " +
                  (dir / "corpus.json").string() + " --bank " +
                  (dir / "bank.json").string() + " --out " +
                  (dir / "ckpt.json").string(),
              dir / "train.out"));
  const json summary = json::parse(slurp(dir / "train.out"));
  CHECK(summary.at("best_seed").get<int>() == 3);
  CHECK(summary.at("runs").size() == 1);
  CHECK(summary.contains("targeted_f1"));

  structsent::Checkpoint ckpt =
      structsent::load_checkpoint((dir / "ckpt.json").string());
  CHECK(ckpt.seed == 3);
  CHECK(ckpt.config.d == 4);

  REQUIRE(run("eval --checkpoint " + (dir / "ckpt.json").string() +
                  " --data " + (dir / "corpus.json").string() + " --bank " +
                  (dir / "bank.json").string(),
              dir / "eval.out"));
  const json report = json::parse(slurp(dir / "eval.out"));
  CHECK(report.at("threshold").get<double>() == 0.5);
  for (const char* key :
       {"expression_f1", "target_f1", "holder_f1", "targeted_f1"}) {
    const double f1 = report.at(key).get<double>();
    CHECK(f1 >= 0.0);
    CHECK(f1 <= 1.0);
  }
  CHECK(report.at("counts").at("expression").at("gold").get<int>() == 4);

  REQUIRE(run("predict --checkpoint " + (dir / "ckpt.json").string() +
                  " --data " + (dir / "corpus.json").string() + " --bank " +
                  (dir / "bank.json").string() + " --out " +
                  (dir / "preds.jsonl").string(),
              dir / "predict.out"));
  const auto preds =
      structsent::read_predictions((dir / "preds.jsonl").string());
  REQUIRE(preds.size() == 4);
  CHECK(preds[0].sent_id == "a1");
  CHECK(preds[3].sent_id == "a4");

  // Raising the threshold can only shrink the prediction set.
  REQUIRE(run("predict --checkpoint " + (dir / "ckpt.json").string() +
                  " --data " + (dir / "corpus.json").string() + " --bank " +
                  (dir / "bank.json").string() + " --threshold 0.9 --out " +
                  (dir / "preds_hi.jsonl").string(),
              dir / "predict_hi.out"));
  const auto hi = structsent::read_predictions((dir / "preds_hi.jsonl").string());
  std::size_t n_lo = 0, n_hi = 0;
  for (const auto& p : preds) n_lo += p.opinions.size();
  for (const auto& p : hi) n_hi += p.opinions.size();
  CHECK(n_hi <= n_lo);
}

TEST_CASE("training twice with one seed writes identical checkpoints",
          "[cli]") {
  const fs::path dir = work_dir() / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir / "corpus.json", kCorpusJson);
  write_file(dir / "config.json", kConfigJson);
  REQUIRE(run("synth-bank --data " + (dir / "corpus.json").string() +
                  " --models 2 --dims 3,5 --seed 11 --out " +
                  (dir / "bank.json").string(),
              dir / "synth.out"));

  const std::string base = "train --config " + (dir / "config.json").string() +
                           " --train " + (dir / "corpus.json").string() +
                           " --dev " + (dir / "corpus.json").string() +
                           " --bank " + (dir / "bank.json").string();
  REQUIRE(run(base + " --out " + (dir / "ckpt1.json").string(),
              dir / "train1.out"));
  REQUIRE(run(base + " --out " + (dir / "ckpt2.json").string(),
              dir / "train2.out"));
  CHECK(slurp(dir / "ckpt1.json") == slurp(dir / "ckpt2.json"));
}

TEST_CASE("import converts offset annotations into the canonical layout",
          "[cli]") {
  const fs::path dir = work_dir() / "import";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir / "offsets.json", kOffsetsJson);

  REQUIRE(run("import --data " + (dir / "offsets.json").string() +
                  " --name rest --language en --out " +
                  (dir / "imported.json").string(),
              dir / "import.out"));
  const json stats = json::parse(slurp(dir / "import.out"));
  CHECK(stats.at("sentences").get<int>() == 2);
  CHECK(stats.at("dropped_neutral").get<int>() == 1);
  CHECK(stats.at("multi_fragment_reduced").get<int>() == 1);
  CHECK(stats.at("fallback_trees").get<int>() == 2);

  structsent::Corpus c =
      structsent::load_corpus((dir / "imported.json").string());
  REQUIRE(c.sentences.size() == 2);
  CHECK(c.name == "rest");
  CHECK(c.sentences[0].tokens ==
        std::vector<std::string>{"The", "food", "was", "great"});
  REQUIRE(c.sentences[0].opinions.size() == 1);
  CHECK(c.sentences[0].opinions[0].expression == structsent::Span{3, 3});
  CHECK(c.sentences[0].opinions[0].target == structsent::Span{0, 1});
  CHECK_FALSE(c.sentences[0].opinions[0].holder.has_value());
  // Neutral opinion is gone; the multi-fragment expression kept its earliest
  // fragment.
  REQUIRE(c.sentences[1].opinions.size() == 1);
  CHECK(c.sentences[1].opinions[0].expression == structsent::Span{2, 2});
}

TEST_CASE("bad inputs exit nonzero with a diagnostic", "[cli]") {
  const fs::path dir = work_dir() / "errors";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir / "corpus.json", kCorpusJson);
  write_file(dir / "bad_config.json", R"({"learning_rate": -1.0})");

  CHECK_FALSE(run("eval --checkpoint /nonexistent.json --data " +
                      (dir / "corpus.json").string() +
                      " --bank /nonexistent.json",
                  dir / "e1.out"));
  CHECK_FALSE(slurp(dir / "e1.out.err").empty());

  CHECK_FALSE(run("train --config " + (dir / "bad_config.json").string() +
                      " --train " + (dir / "corpus.json").string() +
                      " --dev " + (dir / "corpus.json").string() + " --bank " +
                      (dir / "none.json").string() + " --out " +
                      (dir / "ckpt.json").string(),
                  dir / "e2.out"));

  CHECK_FALSE(run("synth-bank --data " + (dir / "corpus.json").string() +
                      " --models 2 --dims 3,x --seed 1 --out " +
                      (dir / "bank.json").string(),
                  dir / "e3.out"));

  // Unknown subcommand and missing required flags are also rejected.
  CHECK_FALSE(run("frobnicate", dir / "e4.out"));
  CHECK_FALSE(run("train --config only", dir / "e5.out"));
}
