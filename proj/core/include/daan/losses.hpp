#pragma once

#include "daan/tensor.hpp"

namespace daan::losses {

enum class RecDistance { mean_squared, euclidean };

struct LossConfig {
  double margin = 1.0;
  RecDistance rec_distance = RecDistance::mean_squared;
};

// Scalar view of one pair's loss; `total` keeps the graph node so backward
// can run on it.
struct Breakdown {
  Tensor total;
  double triplet = 0.0;  // L_t
  double rec = 0.0;      // l_rec
  double ct = 0.0;       // l_ct
  double w = 0.0;        // l_w
  double reg = 0.0;      // L_r
  double total_value = 0.0;
};

// Every embedding one SamplePair forward produces, in the roles the loss
// terms consume them. "+": anchor forward, "-": mined negative forward.
struct PairEmbeddings {
  Tensor theta_a_pos, theta_v_pos, theta_w_pos;
  Tensor theta_a_neg, theta_v_neg, theta_w_neg;
  Tensor rho_a_pos, rho_v_pos, rho_w_pos;
  Tensor rho_a_neg, rho_v_neg;
  Tensor phi_a_pos, phi_v_pos, phi_w_pos;
  Tensor phi_a_rec_pos, phi_v_rec_pos;
  Tensor text_pos;  // the anchor class text embedding (reconstruction target)
};

// max(0, d(anchor, positive) - d(anchor, negative) + margin) with Euclidean d.
Tensor triplet(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
               double margin);

Breakdown loss_total(const PairEmbeddings& e, const LossConfig& cfg);

}  // namespace daan::losses
