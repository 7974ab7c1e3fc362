// End-to-end run at desk scale: a four-sentence corpus, a synthetic
// embedding bank, a short training run, and the decoded structured tuples.

#include <cstdio>

#include "structsent/structsent.hpp"

using namespace structsent;

static Corpus demo_corpus() {
  Corpus c;
  c.name = "demo";
  c.language = "en";
  c.sentences.push_back(Sentence{
      "d1",
      {"the", "crowd", "praised", "the", "new", "stadium"},
      {1, 2, -1, 5, 5, 2},
      {Opinion{Span{0, 1}, Span{3, 5}, Span{2, 2}, Polarity::Positive}}});
  c.sentences.push_back(Sentence{
      "d2",
      {"locals", "hated", "the", "parking"},
      {1, -1, 3, 1},
      {Opinion{Span{0, 0}, Span{2, 3}, Span{1, 1}, Polarity::Negative}}});
  c.sentences.push_back(Sentence{
      "d3",
      {"the", "lighting", "was", "praised"},
      {1, 3, 3, -1},
      {Opinion{std::nullopt, Span{0, 1}, Span{3, 3}, Polarity::Positive}}});
  c.sentences.push_back(
      Sentence{"d4", {"kickoff", "is", "saturday"}, {1, -1, 1}, {}});
  return c;
}

int main() {
  Corpus corpus = demo_corpus();
  EmbeddingBank bank = synthetic_bank(corpus, 2, {8, 12}, 5);

  TrainConfig config;
  config.learning_rate = 1e-2;
  config.epochs = 200;
  config.seeds = {13};
  config.dropout = 0.0;
  config.d = 12;
  config.d_attn = 12;
  config.gcn_layers = 2;
  config.batch_size = 4;

  TrainLog log;
  Checkpoint best = train(corpus, bank, corpus, config, 13, &log);
  std::printf("best epoch %d, dev targeted F1 %.3f\n", best.epoch,
              best.dev_targeted_f1);
  std::printf("first step loss %.4f, last %.4f\n", log.step_losses.front(),
              log.step_losses.back());

  ModelState model = model_from_checkpoint(best);
  MetricsReport report = evaluate(model, corpus, bank, config.threshold);
  std::printf("token F1  expression %.3f  target %.3f  holder %.3f\n",
              report.expression_f1(), report.target_f1(), report.holder_f1());
  std::printf("targeted F1 %.3f\n", report.targeted_f1());

  for (const Sentence& s : corpus.sentences) {
    auto opinions =
        predict_sentence(s, bank.entry(s.sent_id), model, config.threshold);
    std::printf("%s:", s.sent_id.c_str());
    if (opinions.empty()) std::printf(" (no opinions)");
    for (const PredictedOpinion& o : opinions) {
      auto span_text = [&](const std::optional<Span>& sp) {
        if (!sp) return std::string("-");
        std::string out;
        for (std::size_t i = sp->start; i <= sp->end; ++i) {
          if (!out.empty()) out += ' ';
          out += s.tokens[i];
        }
        return out;
      };
      std::printf(" [holder '%s' target '%s' expression '%s' %s]",
                  span_text(o.holder).c_str(), span_text(o.target).c_str(),
                  span_text(o.expression).c_str(),
                  o.polarity == Polarity::Positive ? "P" : "N");
    }
    std::printf("\n");
  }
  return 0;
}
