#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "daan/common.hpp"

namespace daan {

using Shape = std::vector<std::size_t>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized like value when requires_grad
  bool requires_grad = false;
  bool leaf = false;
  // Pull-style backward: distributes this node's grad into its parents.
  std::function<void(Node&)> backward;
  std::vector<std::shared_ptr<Node>> parents;
};

}  // namespace detail

// Dense row-major tensor of doubles. Value-semantics handle onto a shared
// node; ops create fresh nodes and, when a Tape is active and any input
// requires gradients, record a backward rule onto it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  // Leaf with gradient storage; the unit optimizers update in place.
  static Tensor leaf(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;

  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();  // leaves only
  bool requires_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();
  void accumulate_grad(const std::vector<double>& g);
  double item() const;  // size-1 tensors

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend class Tape;
  friend Tensor make_op(const char* name, Shape shape, std::vector<double> value,
                        const std::vector<Tensor>& inputs,
                        std::function<void(detail::Node&)> backward);
};

// Records ops in creation order (which is topological by construction) and
// replays them in exact reverse for backward. One tape per forward pass;
// not shareable across concurrent passes.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Seeds d(loss)/d(loss)=1 and runs every recorded backward rule once, in
  // reverse record order. loss must be a size-1 tensor on a nonempty tape.
  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }
  static Tape* active();

 private:
  void record(std::shared_ptr<detail::Node> node) { nodes_.push_back(std::move(node)); }
  std::vector<std::shared_ptr<detail::Node>> nodes_;

  friend Tensor make_op(const char* name, Shape shape, std::vector<double> value,
                        const std::vector<Tensor>& inputs,
                        std::function<void(detail::Node&)> backward);
};

// --- primitive ops ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt_elem(const Tensor& a);
Tensor sum(const Tensor& a);   // -> {1,1}
Tensor mean(const Tensor& a);  // -> {1,1}

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& x);
// x: [C_in x T], w: [C_out x C_in x K]; left zero padding of (K-1)*dilation
// keeps the output length at T and makes y[:, t] depend only on x[:, <=t].
Tensor conv1d_causal(const Tensor& x, const Tensor& w, std::size_t dilation);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor broadcast_rows(const Tensor& row, std::size_t nrows);  // [1xC] -> [RxC]

// Normalization over the flattened entries split into `groups` contiguous
// groups; gamma/beta have one entry per flattened channel.
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::size_t groups, double eps);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
// Normalizes with the supplied (constant) statistics; gradients flow through
// x, gamma and beta only.
Tensor normalize_stats(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const std::vector<double>& mean, const std::vector<double>& var,
                       double eps);
// Elementwise product with a constant mask (dropout application).
Tensor mul_mask(const Tensor& x, std::vector<double> mask);

// --- compositions used throughout the network ------------------------------

Tensor euclidean(const Tensor& a, const Tensor& b);           // ||a-b||_2 -> scalar
Tensor mean_squared(const Tensor& a, const Tensor& b);        // mean((a-b)^2)
Tensor linear_vec(const Tensor& x, const Tensor& w, const Tensor& b);  // [1xI]·[IxO]+[1xO]

}  // namespace daan
