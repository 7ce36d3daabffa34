#pragma once

#include "daan/nn.hpp"
#include "daan/qdma.hpp"
#include "daan/tensor.hpp"

namespace daan::tcn {

// Temporal bypass over the folded hidden feature: one causal convolution, a
// stack of dilated causal convolutions, and an identity residual. Rows of the
// folded matrix are time steps, columns are channels.
struct TemporalBypass {
  Tensor w_causal;                  // [C x C x K], dilation 1
  std::vector<Tensor> w_dilated;    // n layers, each [C x C x K], dilation k
  std::size_t dilation = 3;
  qdma::TokenFold fold;             // tokens = x_hid, token_dim = y_hid

  TemporalBypass() = default;
  TemporalBypass(nn::ParamStore& store, const std::string& modality, std::size_t hidden,
                 std::size_t x_hid, std::size_t layers, std::size_t dilation, std::size_t kernel,
                 std::mt19937_64& rng);
};

// dilated_stack(causal_conv(fold(o3))) + fold(o3); shape [x_hid x y_hid].
Tensor forward(const Tensor& o3, const TemporalBypass& params);

// Adds the last-time-step embedding of y to every token of o3 and flattens
// back to [1 x hidden].
Tensor temporal_embed_add(const Tensor& o3, const Tensor& y, const qdma::TokenFold& fold);

}  // namespace daan::tcn
