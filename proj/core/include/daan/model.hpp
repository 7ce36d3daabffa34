#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "daan/fusion.hpp"
#include "daan/nn.hpp"
#include "daan/qdma.hpp"
#include "daan/tcn.hpp"
#include "daan/tensor.hpp"

namespace daan::model {

struct ModelConfig {
  std::size_t input = 64;
  std::size_t hidden = 64;
  std::size_t output = 32;
  std::size_t text_dim = 32;

  std::size_t tokens = 8;  // T
  double beta = 0.5;
  std::size_t groups = 4;
  double dropout = 0.1;

  std::size_t tcn_layers = 2;    // n
  std::size_t tcn_dilation = 3;  // k
  std::size_t tcn_kernel = 3;    // K
  std::size_t x_hid = 8;

  std::size_t heads = 1;

  // When false the two attention units are replaced by per-modality
  // two-layer MLPs of matched parameter count (the ablation baseline).
  bool use_qdma = true;

  void validate() const;
  // Per-modality learnable element count of the attention unit + bypass.
  std::size_t unit_param_count() const;
  // Width of the baseline MLP's middle layer for matched parameter count.
  std::size_t mlp_width() const;
};

// Everything one forward pass produces. phi_a / phi_v are the per-modality
// hidden features before the cross-attention exchange; those are the
// reconstruction targets.
struct Embeddings {
  Tensor phi_a, phi_v, phi_w;
  Tensor theta_a, theta_v, theta_w;
  Tensor rho_a, rho_v, rho_w;
  Tensor phi_a_rec, phi_v_rec;
};

class DaanModel {
 public:
  DaanModel(const ModelConfig& cfg, std::uint64_t init_seed);

  Embeddings forward(const std::vector<double>& audio, const std::vector<double>& visual,
                     const std::vector<double>& text, bool training, std::mt19937_64& rng);

  // Text-only path: theta_w for a candidate class (used by the evaluator).
  std::vector<double> project_text(const std::vector<double>& text);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  // Named running-stat blocks, in a fixed order, for checkpointing.
  std::vector<std::pair<std::string, nn::BatchNorm*>> batch_norms();

  qdma::Unit& qdma_unit(bool visual) { return visual ? qdma_v_ : qdma_a_; }
  tcn::TemporalBypass& bypass(bool visual) { return visual ? tcn_v_ : tcn_a_; }
  fusion::CrossAttention& cross() { return cross_; }

 private:
  Tensor modality_hidden(const Tensor& feature, const Tensor& text, bool visual, bool training,
                         std::mt19937_64& rng);

  ModelConfig cfg_;
  nn::ParamStore store_;
  qdma::Unit qdma_a_, qdma_v_;
  tcn::TemporalBypass tcn_a_, tcn_v_;
  nn::Linear mlp_a1_, mlp_a2_, mlp_v1_, mlp_v2_;
  fusion::CrossAttention cross_;
  nn::Linear text_hidden_;
  fusion::Projection proj_a_, proj_v_, proj_w_;
  nn::Linear dec_a_, dec_v_, dec_w_;
  nn::Linear rec_a_, rec_v_;
};

}  // namespace daan::model
