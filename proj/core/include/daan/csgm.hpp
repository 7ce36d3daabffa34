#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "daan/nn.hpp"

namespace daan::csgm {

struct Config {
  double gamma = 0.45;       // contribution floor
  double mu = 1.15;          // normalization regulator
  double noise_scale = 1e-3; // 0 disables the noise term entirely
  bool enabled = true;
  bool vc_only = false;      // ablation: convergence rate as the only metric
  long epoch_start = 0;      // modulation window, inclusive start
  long epoch_end = -1;       // exclusive end; negative means unbounded

  void validate() const;
  bool active_in_epoch(std::size_t epoch) const;
};

// max(d(m, e) - d(m, n), 0): how strongly the triple violates the desired
// target-closer-than-negative geometry.
double delta_raw(const std::vector<double>& m, const std::vector<double>& e,
                 const std::vector<double>& n);
// Bounded to [0, 1) under the mu regulator: 1 - exp(-mu * raw).
double delta(const std::vector<double>& m, const std::vector<double>& e,
             const std::vector<double>& n, double mu);

// The six shared-space projections of one SamplePair.
struct PairThetas {
  std::vector<double> a_pos, v_pos, w_pos;
  std::vector<double> a_neg, v_neg, w_neg;
};

struct ConvergenceRates {
  double audio = 0.0;
  double visual = 0.0;
};

// Product of the three normalized violation terms per modality; a modality
// whose embeddings already satisfy the contrastive geometry converges to 0
// and has its gradients floored at gamma.
ConvergenceRates convergence_rate(const PairThetas& t, double mu);

// ||G_p||^2 / ||Theta_p||^2 over all tensors of one part.
double optimization_rate_raw(const nn::ParamStore& store, const std::vector<std::size_t>& indices);
inline double normalize_optimization_rate(double v) { return v / (1.0 + v); }

// eta = max(v_c * v_o_normalized, gamma).
double contribution_rate(double v_c, double v_o_normalized, double gamma);

enum class ModalityId : std::uint8_t { audio = 0, visual = 1 };
enum class PartId : std::uint8_t { attention = 0, temporal = 1 };

const char* modality_name(ModalityId m);
const char* part_name(PartId p);

struct RateRecord {
  ModalityId modality;
  PartId part;
  double v_c = 0.0;
  double v_o = 0.0;  // normalized; 1 in vc_only mode
  double eta = 0.0;
};

// All (modality, part) contribution rates for the sample whose backward pass
// populated the store's gradients. Parts with no registered parameters are
// omitted (the baseline model has none).
std::vector<RateRecord> sample_rates(const nn::ParamStore& store, const PairThetas& thetas,
                                     const Config& cfg);

// accum[i] += factor_i * grad_i, where factor_i is the sample's eta for
// parameters registered under a modulated part and 1 elsewhere. Throws when a
// registered part has no rate record.
void accumulate_modulated(const nn::ParamStore& store, const std::vector<RateRecord>& rates,
                          std::vector<std::vector<double>>& accum);
void accumulate_plain(const nn::ParamStore& store, std::vector<std::vector<double>>& accum);

// Parameter step. Consumes the accumulated (already modulated) gradients;
// afterwards adds Gaussian noise to the parameters whose indices appear in
// `noisy`, with per-element std = noise_scale * RMS of that tensor's
// accumulated gradient.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(double learning_rate, bool pure_sgd);

  void init(const nn::ParamStore& store);
  void step(nn::ParamStore& store, const std::vector<std::vector<double>>& accum,
            const std::set<std::size_t>& noisy, double noise_scale, std::mt19937_64& noise_rng);

  std::uint64_t step_count() const { return t_; }
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_step_count(std::uint64_t t) { t_ = t; }

 private:
  double lr_ = 1e-3;
  bool pure_sgd_ = false;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace daan::csgm
