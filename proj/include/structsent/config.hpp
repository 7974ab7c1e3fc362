#pragma once

// Training hyperparameters with their JSON form. Field names in the file
// match the struct members one to one; absent fields keep their defaults.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "structsent/corpus.hpp"
#include "structsent/error.hpp"
#include "structsent/fusion.hpp"

namespace structsent {

struct TrainConfig {
  double learning_rate = 1e-5;
  int epochs = 50;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t max_sequence_length = kDefaultMaxSequenceLength;
  double dropout = 0.1;
  int gcn_layers = 3;
  bool gcn_bias = true;
  double epsilon = 0.05;
  double lambda = 1.0;
  bool adversarial_enabled = true;
  double threshold = 0.5;
  std::size_t d = 16;
  std::size_t d_attn = 16;
  std::size_t batch_size = 4;

  AdversarialConfig adversarial() const {
    return {epsilon, lambda, adversarial_enabled};
  }

  void validate() const {
    if (learning_rate <= 0.0) {
      throw config_error("config: learning_rate must be positive");
    }
    if (epochs < 0) throw config_error("config: epochs must be >= 0");
    if (seeds.empty()) throw config_error("config: seeds must not be empty");
    if (max_sequence_length == 0) {
      throw config_error("config: max_sequence_length must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
      throw config_error("config: dropout must lie in [0, 1)");
    }
    if (gcn_layers < 0) throw config_error("config: gcn_layers must be >= 0");
    if (epsilon < 0.0) throw config_error("config: epsilon must be >= 0");
    if (lambda < 0.0) throw config_error("config: lambda must be >= 0");
    if (threshold < 0.0 || threshold > 1.0) {
      throw config_error("config: threshold must lie in [0, 1]");
    }
    if (d == 0 || d_attn == 0) {
      throw config_error("config: d and d_attn must be positive");
    }
    if (batch_size == 0) {
      throw config_error("config: batch_size must be positive");
    }
  }
};

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"seeds", c.seeds},
          {"max_sequence_length", c.max_sequence_length},
          {"dropout", c.dropout},
          {"gcn_layers", c.gcn_layers},
          {"gcn_bias", c.gcn_bias},
          {"epsilon", c.epsilon},
          {"lambda", c.lambda},
          {"adversarial_enabled", c.adversarial_enabled},
          {"threshold", c.threshold},
          {"d", c.d},
          {"d_attn", c.d_attn},
          {"batch_size", c.batch_size}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("learning_rate")) j["learning_rate"].get_to(c.learning_rate);
    if (j.contains("epochs")) j["epochs"].get_to(c.epochs);
    if (j.contains("seeds")) j["seeds"].get_to(c.seeds);
    if (j.contains("max_sequence_length")) {
      j["max_sequence_length"].get_to(c.max_sequence_length);
    }
    if (j.contains("dropout")) j["dropout"].get_to(c.dropout);
    if (j.contains("gcn_layers")) j["gcn_layers"].get_to(c.gcn_layers);
    if (j.contains("gcn_bias")) j["gcn_bias"].get_to(c.gcn_bias);
    if (j.contains("epsilon")) j["epsilon"].get_to(c.epsilon);
    if (j.contains("lambda")) j["lambda"].get_to(c.lambda);
    if (j.contains("adversarial_enabled")) {
      j["adversarial_enabled"].get_to(c.adversarial_enabled);
    }
    if (j.contains("threshold")) j["threshold"].get_to(c.threshold);
    if (j.contains("d")) j["d"].get_to(c.d);
    if (j.contains("d_attn")) j["d_attn"].get_to(c.d_attn);
    if (j.contains("batch_size")) j["batch_size"].get_to(c.batch_size);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace structsent
