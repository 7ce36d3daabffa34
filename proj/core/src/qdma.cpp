#include "daan/qdma.hpp"

#include <cmath>

namespace daan::qdma {

Tensor fold_tokens(const Tensor& x, const TokenFold& fold) {
  if (fold.tokens == 0 || fold.token_dim == 0 || x.size() != fold.tokens * fold.token_dim) {
    throw ShapeError("fold_tokens: " + std::to_string(x.size()) + " elements do not fold into " +
                     std::to_string(fold.tokens) + "x" + std::to_string(fold.token_dim));
  }
  return reshape(x, {fold.tokens, fold.token_dim});
}

Tensor unfold_tokens(const Tensor& x) {
  return reshape(x, {1, x.size()});
}

Unit::Unit(nn::ParamStore& store, const std::string& modality, std::size_t input,
           std::size_t hidden, std::size_t text, std::size_t tokens_, std::size_t groups_,
           double beta_, double dropout_rate_, std::mt19937_64& rng)
    : tokens(tokens_),
      groups(groups_),
      beta(beta_),
      dropout_rate(dropout_rate_),
      input_dim(input),
      hidden_dim(hidden),
      text_dim(text) {
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
  if (tokens == 0 || input % (2 * tokens) != 0) {
    throw ConfigError("input dim " + std::to_string(input) + " must be divisible by 2*T");
  }
  if (hidden % tokens != 0) throw ConfigError("hidden dim must be divisible by T");
  if (text % tokens != 0) throw ConfigError("text dim must be divisible by T");
  if (groups == 0 || hidden % groups != 0) {
    throw ConfigError("group count " + std::to_string(groups) + " does not divide hidden dim " +
                      std::to_string(hidden));
  }
  const std::size_t half = input / tokens / 2;
  const std::size_t att = hidden / tokens;
  const std::size_t text_tok = text / tokens;
  const std::string p = modality + ".attn";
  auto mk = [&](const char* name, std::size_t in, std::size_t out) {
    return store.add(p + "." + name, nn::kPartAttention, modality, {in, out},
                     nn::xavier_uniform(in, out, in * out, rng));
  };
  wq1 = mk("wq1", half, att);
  wk1 = mk("wk1", half, att);
  wq2 = mk("wq2", half, att);
  wk2 = mk("wk2", half, att);
  wv = mk("wv", text_tok, att);
  gn_gamma = store.add(p + ".gn.gamma", nn::kPartAttention, modality, {1, hidden},
                       std::vector<double>(hidden, 1.0));
  gn_beta = store.add(p + ".gn.beta", nn::kPartAttention, modality, {1, hidden},
                      std::vector<double>(hidden, 0.0));
  refine = nn::Linear(store, p + ".refine", nn::kPartAttention, modality, hidden, hidden, rng);
  bn = nn::BatchNorm(store, p + ".bn", nn::kPartAttention, modality, hidden);
}

namespace {

void check_token_inputs(const Tensor& m_tokens, const Unit& unit) {
  if (m_tokens.shape().size() != 2) {
    throw ShapeError("differential attention expects token matrices, got " +
                     format_shape(m_tokens.shape()));
  }
  if (m_tokens.cols() % 2 != 0) {
    throw ShapeError("token dim " + std::to_string(m_tokens.cols()) +
                     " must be even to split into two paths");
  }
  if (m_tokens.rows() != unit.tokens) {
    throw ShapeError("expected " + std::to_string(unit.tokens) + " tokens, got " +
                     std::to_string(m_tokens.rows()));
  }
}

}  // namespace

Tensor differential_scores(const Tensor& m_tokens, const Unit& unit, double beta) {
  check_token_inputs(m_tokens, unit);
  const std::size_t half = m_tokens.cols() / 2;
  Tensor h1 = slice_cols(m_tokens, 0, half);
  Tensor h2 = slice_cols(m_tokens, half, 2 * half);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(unit.wq1.shape()[1]));
  Tensor s1 = softmax_rows(scale(matmul(matmul(h1, unit.wq1), transpose(matmul(h1, unit.wk1))),
                                 inv_sqrt_d));
  if (beta == 0.0) return s1;
  Tensor s2 = softmax_rows(scale(matmul(matmul(h2, unit.wq2), transpose(matmul(h2, unit.wk2))),
                                 inv_sqrt_d));
  return sub(s1, scale(s2, beta));
}

Tensor differential_attention(const Tensor& m_tokens, const Tensor& w_tokens, const Unit& unit,
                              double beta) {
  if (w_tokens.shape().size() != 2 || w_tokens.rows() != m_tokens.shape()[0]) {
    throw ShapeError("text tokens " + format_shape(w_tokens.shape()) +
                     " must match the modality token count");
  }
  Tensor scores = differential_scores(m_tokens, unit, beta);
  Tensor v = matmul(w_tokens, unit.wv);
  return matmul(scores, v);
}

Tensor refinement(const Tensor& o1, Unit& unit, double beta, bool training, std::mt19937_64& rng) {
  Tensor flat = reshape(o1, {1, unit.hidden_dim});
  Tensor o2 = group_norm(flat, unit.gn_gamma, unit.gn_beta, unit.groups, 1e-5);
  Tensor o3 = unit.refine.forward(o2);
  o3 = unit.bn.forward(o3, training);
  o3 = relu(o3);
  nn::Dropout drop{unit.dropout_rate};
  o3 = drop.forward(o3, training, rng);
  return scale(o3, 1.0 - beta);
}

Tensor forward(const Tensor& feature, const Tensor& text, Unit& unit, bool training,
               std::mt19937_64& rng) {
  if (feature.size() != unit.input_dim) {
    throw ShapeError("feature dim " + std::to_string(feature.size()) + " != configured input " +
                     std::to_string(unit.input_dim));
  }
  if (text.size() != unit.text_dim) {
    throw ShapeError("text dim " + std::to_string(text.size()) + " != configured " +
                     std::to_string(unit.text_dim));
  }
  Tensor m_tokens = fold_tokens(feature, {unit.tokens, unit.input_dim / unit.tokens});
  Tensor w_tokens = fold_tokens(text, {unit.tokens, unit.text_dim / unit.tokens});
  Tensor o1 = differential_attention(m_tokens, w_tokens, unit, unit.beta);
  return refinement(o1, unit, unit.beta, training, rng);
}

}  // namespace daan::qdma
