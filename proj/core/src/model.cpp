#include "daan/model.hpp"

#include <cmath>

namespace daan::model {

void ModelConfig::validate() const {
  if (input == 0 || hidden == 0 || output == 0 || text_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (tokens == 0 || input % (2 * tokens) != 0) {
    throw ConfigError("input=" + std::to_string(input) + " must be divisible by 2*T=" +
                      std::to_string(2 * tokens));
  }
  if (hidden % tokens != 0) throw ConfigError("hidden must be divisible by T");
  if (text_dim % tokens != 0) throw ConfigError("text_dim must be divisible by T");
  if (x_hid == 0 || hidden % x_hid != 0) {
    throw ConfigError("hidden=" + std::to_string(hidden) + " must fold into x_hid=" +
                      std::to_string(x_hid));
  }
  if (groups == 0 || hidden % groups != 0) throw ConfigError("groups must divide hidden");
  if (heads == 0 || (hidden / tokens) % heads != 0) {
    throw ConfigError("heads must divide the token dim");
  }
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (tcn_layers < 1 || tcn_dilation < 1 || tcn_kernel < 1) {
    throw ConfigError("tcn layers, dilation and kernel size must be >= 1");
  }
}

std::size_t ModelConfig::unit_param_count() const {
  const std::size_t half = input / tokens / 2;
  const std::size_t att = hidden / tokens;
  const std::size_t text_tok = text_dim / tokens;
  const std::size_t y_hid = hidden / x_hid;
  std::size_t n = 4 * half * att + text_tok * att;  // attention maps
  n += 2 * hidden;                                  // group norm affine
  n += hidden * hidden + hidden;                    // refinement linear
  n += 2 * hidden;                                  // batch norm affine
  n += (tcn_layers + 1) * y_hid * y_hid * tcn_kernel;
  return n;
}

std::size_t ModelConfig::mlp_width() const {
  const double target = static_cast<double>(unit_param_count());
  const double denom = static_cast<double>(input + hidden + 1);
  const double w = (target - static_cast<double>(hidden)) / denom;
  return static_cast<std::size_t>(std::max(1.0, std::round(w)));
}

DaanModel::DaanModel(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  auto rng = stream_rng(init_seed, "init");
  if (cfg_.use_qdma) {
    qdma_a_ = qdma::Unit(store_, "audio", cfg_.input, cfg_.hidden, cfg_.text_dim, cfg_.tokens,
                         cfg_.groups, cfg_.beta, cfg_.dropout, rng);
    tcn_a_ = tcn::TemporalBypass(store_, "audio", cfg_.hidden, cfg_.x_hid, cfg_.tcn_layers,
                                 cfg_.tcn_dilation, cfg_.tcn_kernel, rng);
    qdma_v_ = qdma::Unit(store_, "visual", cfg_.input, cfg_.hidden, cfg_.text_dim, cfg_.tokens,
                         cfg_.groups, cfg_.beta, cfg_.dropout, rng);
    tcn_v_ = tcn::TemporalBypass(store_, "visual", cfg_.hidden, cfg_.x_hid, cfg_.tcn_layers,
                                 cfg_.tcn_dilation, cfg_.tcn_kernel, rng);
  } else {
    const std::size_t mid = cfg_.mlp_width();
    mlp_a1_ = nn::Linear(store_, "audio.mlp1", "", "audio", cfg_.input, mid, rng);
    mlp_a2_ = nn::Linear(store_, "audio.mlp2", "", "audio", mid, cfg_.hidden, rng);
    mlp_v1_ = nn::Linear(store_, "visual.mlp1", "", "visual", cfg_.input, mid, rng);
    mlp_v2_ = nn::Linear(store_, "visual.mlp2", "", "visual", mid, cfg_.hidden, rng);
  }
  cross_ = fusion::CrossAttention(store_, cfg_.hidden, cfg_.tokens, cfg_.heads, rng);
  text_hidden_ = nn::Linear(store_, "text.hidden", "", "", cfg_.text_dim, cfg_.hidden, rng);
  proj_a_ = fusion::Projection(store_, "audio.proj", cfg_.hidden, cfg_.output, cfg_.dropout, rng);
  proj_v_ = fusion::Projection(store_, "visual.proj", cfg_.hidden, cfg_.output, cfg_.dropout, rng);
  proj_w_ = fusion::Projection(store_, "text.proj", cfg_.hidden, cfg_.output, cfg_.dropout, rng);
  dec_a_ = nn::Linear(store_, "audio.dec", "", "", cfg_.output, cfg_.text_dim, rng);
  dec_v_ = nn::Linear(store_, "visual.dec", "", "", cfg_.output, cfg_.text_dim, rng);
  dec_w_ = nn::Linear(store_, "text.dec", "", "", cfg_.output, cfg_.text_dim, rng);
  rec_a_ = nn::Linear(store_, "audio.rec", "", "", cfg_.output, cfg_.hidden, rng);
  rec_v_ = nn::Linear(store_, "visual.rec", "", "", cfg_.output, cfg_.hidden, rng);
}

Tensor DaanModel::modality_hidden(const Tensor& feature, const Tensor& text, bool visual,
                                  bool training, std::mt19937_64& rng) {
  if (cfg_.use_qdma) {
    qdma::Unit& unit = visual ? qdma_v_ : qdma_a_;
    tcn::TemporalBypass& bypass = visual ? tcn_v_ : tcn_a_;
    Tensor o3 = qdma::forward(feature, text, unit, training, rng);
    Tensor y = tcn::forward(o3, bypass);
    return tcn::temporal_embed_add(o3, y, bypass.fold);
  }
  const nn::Linear& l1 = visual ? mlp_v1_ : mlp_a1_;
  const nn::Linear& l2 = visual ? mlp_v2_ : mlp_a2_;
  return l2.forward(relu(l1.forward(feature)));
}

Embeddings DaanModel::forward(const std::vector<double>& audio, const std::vector<double>& visual,
                              const std::vector<double>& text, bool training,
                              std::mt19937_64& rng) {
  Tensor a = Tensor::from({1, cfg_.input}, audio);
  Tensor v = Tensor::from({1, cfg_.input}, visual);
  Tensor w = Tensor::from({1, cfg_.text_dim}, text);

  Embeddings e;
  e.phi_a = modality_hidden(a, w, false, training, rng);
  e.phi_v = modality_hidden(v, w, true, training, rng);
  auto [a_crs, v_crs] = cross_.forward(e.phi_a, e.phi_v);
  e.phi_w = text_hidden_.forward(w);

  e.theta_a = proj_a_.forward(a_crs, training, rng);
  e.theta_v = proj_v_.forward(v_crs, training, rng);
  e.theta_w = proj_w_.forward(e.phi_w, training, rng);

  e.rho_a = dec_a_.forward(e.theta_a);
  e.rho_v = dec_v_.forward(e.theta_v);
  e.rho_w = dec_w_.forward(e.theta_w);
  e.phi_a_rec = rec_a_.forward(e.theta_a);
  e.phi_v_rec = rec_v_.forward(e.theta_v);
  return e;
}

std::vector<double> DaanModel::project_text(const std::vector<double>& text) {
  std::mt19937_64 unused(0);
  Tensor w = Tensor::from({1, cfg_.text_dim}, text);
  Tensor theta = proj_w_.forward(text_hidden_.forward(w), /*training=*/false, unused);
  return theta.values();
}

std::vector<std::pair<std::string, nn::BatchNorm*>> DaanModel::batch_norms() {
  std::vector<std::pair<std::string, nn::BatchNorm*>> out;
  if (cfg_.use_qdma) {
    out.emplace_back("audio.attn.bn", &qdma_a_.bn);
    out.emplace_back("visual.attn.bn", &qdma_v_.bn);
  }
  out.emplace_back("audio.proj.bn", &proj_a_.bn);
  out.emplace_back("visual.proj.bn", &proj_v_.bn);
  out.emplace_back("text.proj.bn", &proj_w_.bn);
  return out;
}

}  // namespace daan::model
