#include "daan/tcn.hpp"

namespace daan::tcn {

TemporalBypass::TemporalBypass(nn::ParamStore& store, const std::string& modality,
                               std::size_t hidden, std::size_t x_hid, std::size_t layers,
                               std::size_t dilation_, std::size_t kernel, std::mt19937_64& rng)
    : dilation(dilation_) {
  if (layers < 1) throw ConfigError("the dilated stack needs at least one layer");
  if (dilation < 1 || kernel < 1) throw ParameterError("dilation and kernel size must be >= 1");
  if (x_hid == 0 || hidden % x_hid != 0) {
    throw ConfigError("hidden dim " + std::to_string(hidden) + " must fold into x_hid=" +
                      std::to_string(x_hid) + " time steps");
  }
  fold.tokens = x_hid;
  fold.token_dim = hidden / x_hid;
  const std::size_t c = fold.token_dim;
  const std::string p = modality + ".tcn";
  auto mk = [&](const std::string& name) {
    return store.add(p + "." + name, nn::kPartTemporal, modality, {c, c, kernel},
                     nn::xavier_uniform(c * kernel, c, c * c * kernel, rng));
  };
  w_causal = mk("causal");
  for (std::size_t l = 0; l < layers; ++l) w_dilated.push_back(mk("dilated" + std::to_string(l)));
}

Tensor forward(const Tensor& o3, const TemporalBypass& params) {
  if (o3.size() != params.fold.tokens * params.fold.token_dim) {
    throw ShapeError("tcn: hidden feature of " + std::to_string(o3.size()) +
                     " elements does not fold into " + std::to_string(params.fold.tokens) + "x" +
                     std::to_string(params.fold.token_dim));
  }
  Tensor folded = qdma::fold_tokens(o3, params.fold);       // [T_time x C]
  Tensor seq = transpose(folded);                           // conv layout [C x T_time]
  seq = conv1d_causal(seq, params.w_causal, 1);
  for (const Tensor& w : params.w_dilated) seq = conv1d_causal(seq, w, params.dilation);
  return add(transpose(seq), folded);
}

Tensor temporal_embed_add(const Tensor& o3, const Tensor& y, const qdma::TokenFold& fold) {
  Tensor folded = qdma::fold_tokens(o3, fold);
  if (y.shape() != folded.shape()) {
    throw ShapeError("temporal embedding " + format_shape(y.shape()) +
                     " does not match the folded feature " + format_shape(folded.shape()));
  }
  Tensor last = slice_rows(y, fold.tokens - 1, fold.tokens);
  return unfold_tokens(add(folded, broadcast_rows(last, fold.tokens)));
}

}  // namespace daan::tcn
