#include "daan/fusion.hpp"

#include <cmath>

namespace daan::fusion {

CrossBranch::CrossBranch(nn::ParamStore& store, const std::string& modality, std::size_t hidden,
                         std::size_t tokens, std::mt19937_64& rng) {
  const std::size_t tok = hidden / tokens;
  const std::string p = modality + ".cross";
  auto mk = [&](const char* name) {
    return store.add(p + "." + name, "", modality, {tok, tok},
                     nn::xavier_uniform(tok, tok, tok * tok, rng));
  };
  wq = mk("wq");
  wk = mk("wk");
  wv = mk("wv");
  ff1 = nn::Linear(store, p + ".ff1", "", modality, hidden, hidden, rng);
  ff2 = nn::Linear(store, p + ".ff2", "", modality, hidden, hidden, rng);
  ln_gamma = store.add(p + ".ln.gamma", "", modality, {1, hidden},
                       std::vector<double>(hidden, 1.0));
  ln_beta = store.add(p + ".ln.beta", "", modality, {1, hidden},
                      std::vector<double>(hidden, 0.0));
}

CrossAttention::CrossAttention(nn::ParamStore& store, std::size_t hidden, std::size_t tokens_,
                               std::size_t heads_, std::mt19937_64& rng)
    : tokens(tokens_), heads(heads_) {
  if (tokens == 0 || hidden % tokens != 0) {
    throw ConfigError("hidden dim must be divisible by the token count");
  }
  if (heads == 0 || (hidden / tokens) % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " does not divide the token dim " +
                      std::to_string(hidden / tokens));
  }
  audio = CrossBranch(store, "audio", hidden, tokens, rng);
  visual = CrossBranch(store, "visual", hidden, tokens, rng);
}

namespace {

Tensor attend(const Tensor& q_tokens, const Tensor& kv_tokens, const CrossBranch& branch,
              std::size_t heads) {
  Tensor q = matmul(q_tokens, branch.wq);
  Tensor k = matmul(kv_tokens, branch.wk);
  Tensor v = matmul(kv_tokens, branch.wv);
  const std::size_t tok = q.cols();
  const std::size_t hd = tok / heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(hd));
  if (heads == 1) {
    return matmul(softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d)), v);
  }
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
    Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
    Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
    outs.push_back(matmul(softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_d)), vh));
  }
  return concat_cols(outs);
}

Tensor branch_forward(const Tensor& own, const Tensor& other, const CrossBranch& branch,
                      std::size_t tokens, std::size_t heads) {
  const std::size_t hidden = own.size();
  qdma::TokenFold fold{tokens, hidden / tokens};
  Tensor own_tok = qdma::fold_tokens(own, fold);
  Tensor other_tok = qdma::fold_tokens(other, fold);
  Tensor attended = qdma::unfold_tokens(attend(own_tok, other_tok, branch, heads));
  Tensor u = add(own, attended);
  Tensor f = branch.ff2.forward(relu(branch.ff1.forward(u)));
  return layer_norm(add(u, f), branch.ln_gamma, branch.ln_beta, 1e-5);
}

}  // namespace

std::pair<Tensor, Tensor> CrossAttention::forward(const Tensor& phi_a, const Tensor& phi_v) const {
  if (phi_a.size() != phi_v.size()) {
    throw ShapeError("cross attention inputs disagree: " + format_shape(phi_a.shape()) + " vs " +
                     format_shape(phi_v.shape()));
  }
  Tensor a = branch_forward(phi_a, phi_v, audio, tokens, heads);
  Tensor v = branch_forward(phi_v, phi_a, visual, tokens, heads);
  return {a, v};
}

Projection::Projection(nn::ParamStore& store, const std::string& prefix, std::size_t in,
                       std::size_t out, double dropout_rate_, std::mt19937_64& rng)
    : dropout_rate(dropout_rate_) {
  map = nn::Linear(store, prefix + ".map", "", "", in, out, rng);
  bn = nn::BatchNorm(store, prefix + ".bn", "", "", out);
}

Tensor Projection::forward(const Tensor& x, bool training, std::mt19937_64& rng) {
  Tensor y = relu(bn.forward(map.forward(x), training));
  nn::Dropout drop{dropout_rate};
  return drop.forward(y, training, rng);
}

}  // namespace daan::fusion
