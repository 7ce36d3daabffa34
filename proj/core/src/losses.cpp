#include "daan/losses.hpp"

namespace daan::losses {

Tensor triplet(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
               double margin) {
  if (anchor.shape() != positive.shape() || anchor.shape() != negative.shape()) {
    throw ContractError("triplet embeddings must share one shape");
  }
  Tensor gap = sub(euclidean(anchor, positive), euclidean(anchor, negative));
  return relu(add_scalar(gap, margin));
}

Breakdown loss_total(const PairEmbeddings& e, const LossConfig& cfg) {
  const double m = cfg.margin;
  if (m < 0.0) throw ContractError("triplet margin must be nonnegative");

  // Direct alignment triplets over the shared output space.
  Tensor l_t = add(add(triplet(e.theta_a_pos, e.theta_w_pos, e.theta_a_neg, m),
                       triplet(e.theta_v_pos, e.theta_w_pos, e.theta_v_neg, m)),
                   add(triplet(e.theta_w_pos, e.theta_a_pos, e.theta_w_neg, m),
                       triplet(e.theta_w_pos, e.theta_v_pos, e.theta_w_neg, m)));

  // Decoder outputs must land on the class text embedding.
  auto rec_d = [&](const Tensor& a, const Tensor& b) {
    return cfg.rec_distance == RecDistance::mean_squared ? mean_squared(a, b) : euclidean(a, b);
  };
  Tensor l_rec = add(add(rec_d(e.rho_a_pos, e.text_pos), rec_d(e.rho_v_pos, e.text_pos)),
                     rec_d(e.rho_w_pos, e.text_pos));

  Tensor l_ct = add(triplet(e.rho_w_pos, e.rho_a_pos, e.rho_a_neg, m),
                    triplet(e.rho_w_pos, e.rho_v_pos, e.rho_v_neg, m));

  Tensor l_w = add(add(triplet(e.theta_w_pos, e.theta_a_pos, e.theta_a_neg, m),
                       triplet(e.theta_w_pos, e.theta_v_pos, e.theta_v_neg, m)),
                   add(triplet(e.theta_a_pos, e.theta_w_pos, e.theta_w_neg, m),
                       triplet(e.theta_v_pos, e.theta_w_pos, e.theta_w_neg, m)));

  // Reconstruction fidelity plus hidden-space text alignment.
  Tensor l_r = add(add(euclidean(e.phi_a_rec_pos, e.phi_a_pos),
                       euclidean(e.phi_v_rec_pos, e.phi_v_pos)),
                   add(euclidean(e.phi_a_pos, e.phi_w_pos),
                       euclidean(e.phi_v_pos, e.phi_w_pos)));

  Breakdown out;
  out.total = add(add(l_t, add(add(l_rec, l_ct), l_w)), l_r);
  out.triplet = l_t.item();
  out.rec = l_rec.item();
  out.ct = l_ct.item();
  out.w = l_w.item();
  out.reg = l_r.item();
  out.total_value = out.total.item();
  return out;
}

}  // namespace daan::losses
