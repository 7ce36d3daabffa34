#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "daan/common.hpp"

namespace daan::data {

struct ClassLabel {
  std::uint32_t id = 0;
  std::string name;
  bool seen = false;
};

struct Sample {
  std::vector<double> audio;   // dim = input
  std::vector<double> visual;  // dim = input
  std::uint32_t label = 0;
};

struct TextEmbedding {
  std::uint32_t class_id = 0;
  std::vector<double> w;  // dim = text_dim, unit norm
};

// Anchor plus a mined different-class negative; the unit the modulated
// optimizer operates on.
struct SamplePair {
  const Sample* anchor = nullptr;
  const Sample* negative = nullptr;
  const TextEmbedding* anchor_text = nullptr;
  const TextEmbedding* negative_text = nullptr;
};

struct SynthConfig {
  std::uint32_t num_seen_classes = 20;
  std::uint32_t num_unseen_classes = 5;
  std::uint32_t samples_per_class = 100;       // train, seen classes only
  std::uint32_t test_samples_per_class = 20;   // test, all classes
  std::uint32_t input_dim = 64;
  std::uint32_t text_dim = 32;
  // Signal-to-noise ratio per modality; infinity disables the noise term.
  double audio_snr = 1.0;
  double visual_snr = 100.0;
  double content_bias_std = 0.1;
  std::uint64_t seed = 7;

  void validate() const;
};

struct Dataset {
  std::vector<ClassLabel> classes;      // ids dense in [0, num_classes)
  std::vector<TextEmbedding> text;      // one per class, indexed by id
  std::vector<Sample> train;            // seen classes only
  std::vector<Sample> test;             // seen and unseen classes
  std::uint32_t input_dim = 0;
  std::uint32_t text_dim = 0;

  std::uint32_t num_seen() const;
  std::uint64_t split_hash() const;
  void validate() const;
};

// Deterministic generator: every random draw comes from a counter-based
// stream keyed on (seed, purpose, class, index), so the dataset is a pure
// function of the config regardless of generation order.
Dataset generate_synthetic(const SynthConfig& cfg);

// The noise-free image of a class prototype under one modality's fixed map;
// equals every sample of that class when bias and noise are disabled.
std::vector<double> clean_feature(const SynthConfig& cfg, bool visual, std::uint32_t class_id);

// Uniform pick among the batch members whose label differs from the anchor's.
// Throws MiningError when no such member exists (the caller must re-batch).
std::size_t mine_negative(const std::vector<const Sample*>& batch, std::size_t anchor_index,
                          std::mt19937_64& rng);

// One feature file per split: binary "DAAN" container, or JSON-lines when the
// path ends in ".jsonl".
void save_split(const Dataset& ds, const std::vector<Sample>& samples, const std::string& path);
void save_dataset(const Dataset& ds, const std::string& dir, const std::string& extension);
// Loads a {train, test} pair previously written by save_dataset.
Dataset load_dataset(const std::string& dir, const std::string& extension);
// Loads one split file; `into` receives the samples, class table is returned.
void load_split(const std::string& path, std::vector<ClassLabel>& classes,
                std::vector<TextEmbedding>& text, std::vector<Sample>& samples,
                std::uint32_t& input_dim, std::uint32_t& text_dim);

}  // namespace daan::data
