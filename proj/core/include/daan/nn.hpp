#pragma once

#include <random>
#include <string>
#include <vector>

#include "daan/tensor.hpp"

namespace daan::nn {

// Part ids used for gradient modulation targeting. Only parameters tagged
// with one of these two parts are modulated; everything else updates plainly.
inline constexpr const char* kPartAttention = "qdma.attn";
inline constexpr const char* kPartTemporal = "qdma.tcn";

struct Parameter {
  std::string name;      // unique, e.g. "audio.attn.wq1"
  std::string part;      // kPartAttention, kPartTemporal, or "" (unmodulated)
  std::string modality;  // "audio", "visual", or "" (shared)
  Tensor value;          // requires-grad leaf
};

// Owns every learnable tensor of a model, in registration order. Registration
// order is the canonical iteration order everywhere (optimizer state,
// checkpoints, hashing), which keeps runs replayable.
class ParamStore {
 public:
  Tensor add(std::string name, std::string part, std::string modality, Shape shape,
             std::vector<double> init);

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t count() const { return params_.size(); }
  std::size_t total_elements() const;

  void zero_grad();
  // Indices of parameters with the given (modality, part) tag.
  std::vector<std::size_t> indices_of(const std::string& modality, const std::string& part) const;

  std::uint64_t value_hash() const;

 private:
  std::vector<Parameter> params_;
};

std::vector<double> xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::size_t n,
                                   std::mt19937_64& rng);

// y = x · W + b  with x:[1 x in], W:[in x out], b:[1 x out].
struct Linear {
  Tensor w, b;
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, const std::string& part,
         const std::string& modality, std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const { return linear_vec(x, w, b); }
};

// Per-channel standardization against running statistics. The forward pass
// always normalizes with the stats as of entry; in training mode the stats
// are then advanced by an exponential moving average of the sample just
// seen. Keeping the normalization constants fixed within a forward makes the
// pass a pure function of inputs and parameters, so tape gradients match
// finite differences.
struct BatchNorm {
  Tensor gamma, beta;
  std::vector<double> running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNorm() = default;
  BatchNorm(ParamStore& store, const std::string& prefix, const std::string& part,
            const std::string& modality, std::size_t channels);
  Tensor forward(const Tensor& x, bool training);
};

struct Dropout {
  double rate = 0.0;
  Tensor forward(const Tensor& x, bool training, std::mt19937_64& rng) const;
};

}  // namespace daan::nn
