#include "daan/nn.hpp"

#include <cmath>

namespace daan::nn {

Tensor ParamStore::add(std::string name, std::string part, std::string modality, Shape shape,
                       std::vector<double> init) {
  for (const Parameter& p : params_) {
    if (p.name == name) throw ConfigError("duplicate parameter name: " + name);
  }
  Tensor t = Tensor::leaf(std::move(shape), std::move(init));
  params_.push_back(Parameter{std::move(name), std::move(part), std::move(modality), t});
  return t;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (Parameter& p : params_) p.value.zero_grad();
}

std::vector<std::size_t> ParamStore::indices_of(const std::string& modality,
                                                const std::string& part) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].modality == modality && params_[i].part == part) out.push_back(i);
  }
  return out;
}

std::uint64_t ParamStore::value_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Parameter& p : params_) {
    const auto& v = p.value.values();
    h = fnv1a(v.data(), v.size() * sizeof(double), h);
  }
  return h;
}

std::vector<double> xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::size_t n,
                                   std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> out(n);
  for (double& x : out) x = dist(rng);
  return out;
}

Linear::Linear(ParamStore& store, const std::string& prefix, const std::string& part,
               const std::string& modality, std::size_t in, std::size_t out,
               std::mt19937_64& rng) {
  w = store.add(prefix + ".w", part, modality, {in, out}, xavier_uniform(in, out, in * out, rng));
  b = store.add(prefix + ".b", part, modality, {1, out}, std::vector<double>(out, 0.0));
}

BatchNorm::BatchNorm(ParamStore& store, const std::string& prefix, const std::string& part,
                     const std::string& modality, std::size_t channels) {
  gamma = store.add(prefix + ".gamma", part, modality, {1, channels},
                    std::vector<double>(channels, 1.0));
  beta = store.add(prefix + ".beta", part, modality, {1, channels},
                   std::vector<double>(channels, 0.0));
  running_mean.assign(channels, 0.0);
  running_var.assign(channels, 1.0);
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
  Tensor y = normalize_stats(x, gamma, beta, running_mean, running_var, eps);
  if (training) {
    const auto& xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double dev = xv[i] - running_mean[i];
      running_mean[i] += momentum * dev;
      running_var[i] = (1.0 - momentum) * running_var[i] + momentum * dev * dev;
    }
  }
  return y;
}

Tensor Dropout::forward(const Tensor& x, bool training, std::mt19937_64& rng) const {
  if (!training || rate <= 0.0) return x;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = dist(rng) < rate ? 0.0 : keep_scale;
  return mul_mask(x, std::move(mask));
}

}  // namespace daan::nn
