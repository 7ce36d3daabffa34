#pragma once

#include <string>

#include "daan/csgm.hpp"
#include "daan/data.hpp"
#include "daan/eval.hpp"
#include "daan/losses.hpp"
#include "daan/model.hpp"

namespace daan::config {

// Flat dotted-key configuration for a whole experiment. A config file is
// plain "key = value" lines ('#' comments); CLI --set overrides win.
struct ExperimentConfig {
  model::ModelConfig model;
  csgm::Config csgm;
  losses::LossConfig loss;

  struct Train {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 7;
    bool pure_sgd = false;
    std::string resume_from;
  } train;

  struct Data {
    bool synthetic = true;
    std::string path;          // directory holding train.<ext> / test.<ext>
    std::string format = "daan";  // "daan" (binary) or "jsonl"
    data::SynthConfig synth;
  } data;

  eval::FusionRule fusion_rule = eval::FusionRule::average;

  void set_key(const std::string& key, const std::string& value);
  void apply_overrides(const std::vector<std::string>& assignments);  // "key=value"
  void validate();  // also propagates tied dims into the synth config

  std::string to_text() const;
  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

}  // namespace daan::config
