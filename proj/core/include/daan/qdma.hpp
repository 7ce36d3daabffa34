#pragma once

#include "daan/nn.hpp"
#include "daan/tensor.hpp"

namespace daan::qdma {

// Row-major fold of a flat feature vector into T tokens of token_dim each.
struct TokenFold {
  std::size_t tokens = 1;
  std::size_t token_dim = 0;
};

Tensor fold_tokens(const Tensor& x, const TokenFold& fold);    // [1xd] -> [T x token_dim]
Tensor unfold_tokens(const Tensor& x);                         // exact inverse

// Split-path subtractive attention plus the refinement head for one modality.
// The two score paths see the two halves of each token; the value path sees
// the class text tokens.
struct Unit {
  // attention: W maps half-token dim -> attention dim (= hidden / T)
  Tensor wq1, wk1, wq2, wk2;
  Tensor wv;  // text token dim -> attention dim
  // refinement
  Tensor gn_gamma, gn_beta;
  nn::Linear refine;
  nn::BatchNorm bn;

  std::size_t tokens = 8;
  std::size_t groups = 4;
  double beta = 0.5;
  double dropout_rate = 0.1;
  std::size_t input_dim = 0, hidden_dim = 0, text_dim = 0;

  Unit() = default;
  Unit(nn::ParamStore& store, const std::string& modality, std::size_t input, std::size_t hidden,
       std::size_t text_dim, std::size_t tokens, std::size_t groups, double beta,
       double dropout_rate, std::mt19937_64& rng);
};

// The subtracted score map S(Q1·K1^T/sqrt(d)) - beta * S(Q2·K2^T/sqrt(d)),
// shape [T x T]. Each path's rows sum to 1, so these rows sum to (1 - beta).
Tensor differential_scores(const Tensor& m_tokens, const Unit& unit, double beta);

// Scores applied to the text-derived value tokens: [T x attention_dim].
Tensor differential_attention(const Tensor& m_tokens, const Tensor& w_tokens, const Unit& unit,
                              double beta);

// Group-normalized, linearly refined, (1-beta)-scaled flat hidden feature.
Tensor refinement(const Tensor& o1, Unit& unit, double beta, bool training, std::mt19937_64& rng);

// fold -> differential attention -> refinement; [1 x input] -> [1 x hidden].
Tensor forward(const Tensor& feature, const Tensor& text, Unit& unit, bool training,
               std::mt19937_64& rng);

}  // namespace daan::qdma
