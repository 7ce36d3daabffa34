#pragma once

#include "daan/nn.hpp"
#include "daan/tensor.hpp"

namespace daan::fusion {

// One modality's side of the cross-attention exchange: queries come from the
// owning modality's tokens, keys and values from the other modality's. The
// attended tokens join the input through a residual add, pass the
// feed-forward block through a second residual, and are layer-normalized.
struct CrossBranch {
  Tensor wq, wk, wv;          // [token_dim x token_dim]
  nn::Linear ff1, ff2;        // hidden -> hidden, ReLU between
  Tensor ln_gamma, ln_beta;   // [1 x hidden]

  CrossBranch() = default;
  CrossBranch(nn::ParamStore& store, const std::string& modality, std::size_t hidden,
              std::size_t tokens, std::mt19937_64& rng);
};

struct CrossAttention {
  CrossBranch audio, visual;
  std::size_t tokens = 8;
  std::size_t heads = 1;

  CrossAttention() = default;
  CrossAttention(nn::ParamStore& store, std::size_t hidden, std::size_t tokens, std::size_t heads,
                 std::mt19937_64& rng);

  std::pair<Tensor, Tensor> forward(const Tensor& phi_a, const Tensor& phi_v) const;
};

// Linear + BatchNorm + ReLU + Dropout into the shared output space.
struct Projection {
  nn::Linear map;
  nn::BatchNorm bn;
  double dropout_rate = 0.1;

  Projection() = default;
  Projection(nn::ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
             double dropout_rate, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, bool training, std::mt19937_64& rng);
};

}  // namespace daan::fusion
