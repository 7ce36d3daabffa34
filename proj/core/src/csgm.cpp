#include "daan/csgm.hpp"

#include <cmath>

namespace daan::csgm {

void Config::validate() const {
  if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("gamma must lie in (0, 1]");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (noise_scale < 0.0) throw ConfigError("noise_scale must be nonnegative");
  if (epoch_start < 0) throw ConfigError("epoch_start must be nonnegative");
}

bool Config::active_in_epoch(std::size_t epoch) const {
  if (!enabled) return false;
  if (epoch < static_cast<std::size_t>(epoch_start)) return false;
  return epoch_end < 0 || epoch < static_cast<std::size_t>(epoch_end);
}

namespace {

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("delta embeddings must share one dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double delta_raw(const std::vector<double>& m, const std::vector<double>& e,
                 const std::vector<double>& n) {
  return std::max(euclid(m, e) - euclid(m, n), 0.0);
}

double delta(const std::vector<double>& m, const std::vector<double>& e,
             const std::vector<double>& n, double mu) {
  return 1.0 - std::exp(-mu * delta_raw(m, e, n));
}

ConvergenceRates convergence_rate(const PairThetas& t, double mu) {
  if (t.a_pos.empty() || t.v_pos.empty() || t.w_pos.empty() || t.a_neg.empty() ||
      t.v_neg.empty() || t.w_neg.empty()) {
    throw ContractError("convergence_rate needs all six pair embeddings");
  }
  ConvergenceRates out;
  out.audio = delta(t.a_pos, t.w_pos, t.a_neg, mu) * delta(t.w_pos, t.a_pos, t.a_neg, mu) *
              delta(t.a_pos, t.w_pos, t.w_neg, mu);
  out.visual = delta(t.v_pos, t.w_pos, t.v_neg, mu) * delta(t.w_pos, t.v_pos, t.v_neg, mu) *
               delta(t.v_pos, t.w_pos, t.w_neg, mu);
  return out;
}

double optimization_rate_raw(const nn::ParamStore& store,
                             const std::vector<std::size_t>& indices) {
  double g2 = 0.0, p2 = 0.0;
  for (std::size_t i : indices) {
    const auto& param = store.all()[i];
    const auto& g = param.value.grad();
    const auto& v = param.value.values();
    for (double x : g) g2 += x * x;
    for (double x : v) p2 += x * x;
  }
  if (p2 <= 0.0) {
    throw ContractError("optimization rate over a zero-norm parameter part");
  }
  return g2 / p2;
}

double contribution_rate(double v_c, double v_o_normalized, double gamma) {
  return std::max(v_c * v_o_normalized, gamma);
}

const char* modality_name(ModalityId m) { return m == ModalityId::audio ? "audio" : "visual"; }
const char* part_name(PartId p) {
  return p == PartId::attention ? nn::kPartAttention : nn::kPartTemporal;
}

std::vector<RateRecord> sample_rates(const nn::ParamStore& store, const PairThetas& thetas,
                                     const Config& cfg) {
  const ConvergenceRates vc = convergence_rate(thetas, cfg.mu);
  std::vector<RateRecord> out;
  for (ModalityId m : {ModalityId::audio, ModalityId::visual}) {
    const double v_c = m == ModalityId::audio ? vc.audio : vc.visual;
    for (PartId p : {PartId::attention, PartId::temporal}) {
      const auto indices = store.indices_of(modality_name(m), part_name(p));
      if (indices.empty()) continue;
      double v_o = 1.0;
      if (!cfg.vc_only) {
        v_o = normalize_optimization_rate(optimization_rate_raw(store, indices));
      }
      out.push_back(RateRecord{m, p, v_c, v_o, contribution_rate(v_c, v_o, cfg.gamma)});
    }
  }
  return out;
}

void accumulate_modulated(const nn::ParamStore& store, const std::vector<RateRecord>& rates,
                          std::vector<std::vector<double>>& accum) {
  const auto& params = store.all();
  if (accum.size() != params.size()) throw ContractError("accumulator size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    double factor = 1.0;
    if (!p.part.empty()) {
      const RateRecord* found = nullptr;
      for (const RateRecord& r : rates) {
        if (p.modality == modality_name(r.modality) && p.part == part_name(r.part)) {
          found = &r;
          break;
        }
      }
      if (!found) {
        throw ContractError("no contribution rate for registered part " + p.modality + "/" +
                            p.part);
      }
      factor = found->eta;
    }
    const auto& g = p.value.grad();
    auto& a = accum[i];
    for (std::size_t j = 0; j < g.size(); ++j) a[j] += factor * g[j];
  }
}

void accumulate_plain(const nn::ParamStore& store, std::vector<std::vector<double>>& accum) {
  const auto& params = store.all();
  if (accum.size() != params.size()) throw ContractError("accumulator size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].value.grad();
    auto& a = accum[i];
    for (std::size_t j = 0; j < g.size(); ++j) a[j] += g[j];
  }
}

Optimizer::Optimizer(double learning_rate, bool pure_sgd)
    : lr_(learning_rate), pure_sgd_(pure_sgd) {}

void Optimizer::init(const nn::ParamStore& store) {
  m_.clear();
  v_.clear();
  for (const auto& p : store.all()) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
  t_ = 0;
}

void Optimizer::step(nn::ParamStore& store, const std::vector<std::vector<double>>& accum,
                     const std::set<std::size_t>& noisy, double noise_scale,
                     std::mt19937_64& noise_rng) {
  auto& params = store.all();
  if (accum.size() != params.size()) throw ContractError("optimizer gradient count mismatch");
  if (!pure_sgd_ && m_.size() != params.size()) init(store);
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].value.mutable_values();
    const auto& g = accum[i];
    if (pure_sgd_) {
      for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= lr_ * g[j];
    } else {
      auto& m = m_[i];
      auto& v = v_[i];
      const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
      for (std::size_t j = 0; j < theta.size(); ++j) {
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
        theta[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
      }
    }
  }
  if (noise_scale > 0.0) {
    for (std::size_t i : noisy) {
      const auto& g = accum[i];
      double rms = 0.0;
      for (double x : g) rms += x * x;
      rms = std::sqrt(rms / static_cast<double>(g.size()));
      if (rms <= 0.0) continue;
      std::normal_distribution<double> dist(0.0, noise_scale * rms);
      auto& theta = params[i].value.mutable_values();
      for (double& x : theta) x += dist(noise_rng);
    }
  }
}

}  // namespace daan::csgm
