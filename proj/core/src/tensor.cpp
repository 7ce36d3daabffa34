#include "daan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace daan {

namespace {

thread_local std::vector<Tape*> g_tape_stack;

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero extent in shape " + format_shape(shape));
    n *= d;
  }
  return n;
}

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
  }
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.shape().size() != 2) {
    throw ShapeError(std::string(op) + " expects a rank-2 tensor, got " +
                     format_shape(t.shape()));
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + format_shape(a.shape()) +
                     " vs " + format_shape(b.shape()));
  }
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
  return full(std::move(shape), 0.0);
}

Tensor Tensor::full(Shape shape, double v) {
  auto node = std::make_shared<detail::Node>();
  node->value.assign(shape_numel(shape), v);
  node->shape = std::move(shape);
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  std::size_t n = shape_numel(shape);
  if (values.size() != n) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not fill shape " + format_shape(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) {
  return from({1, 1}, {v});
}

Tensor Tensor::leaf(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->leaf = true;
  t.node_->grad.assign(t.node_->value.size(), 0.0);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  require_rank2("rows", *this);
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  require_rank2("cols", *this);
  return node_->shape[1];
}

const std::vector<double>& Tensor::values() const { return node_->value; }

std::vector<double>& Tensor::mutable_values() {
  if (!node_->leaf) throw ContractError("mutable_values is restricted to leaf tensors");
  return node_->value;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
  if (!requires_grad()) throw ContractError("grad requested on a tensor without gradient storage");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (requires_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::accumulate_grad(const std::vector<double>& g) {
  if (!requires_grad()) throw ContractError("accumulate_grad on a tensor without gradient storage");
  if (g.size() != node_->grad.size()) throw ShapeError("accumulate_grad size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " + format_shape(shape()));
  }
  return node_->value[0];
}

// --- Tape -------------------------------------------------------------------

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
  if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a scalar loss tensor");
  }
  if (nodes_.empty()) throw ContractError("backward on an empty tape");
  if (!loss.node()->requires_grad) {
    throw ContractError("backward on a loss that does not require gradients");
  }
  loss.node()->grad.assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& n = **it;
    if (n.backward) n.backward(n);
  }
}

// --- op plumbing ------------------------------------------------------------

Tensor make_op(const char* name, Shape shape, std::vector<double> value,
               const std::vector<Tensor>& inputs,
               std::function<void(detail::Node&)> backward) {
  check_finite(name, value);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);

  Tape* tape = Tape::active();
  bool track = false;
  if (tape) {
    for (const Tensor& in : inputs) {
      if (in.requires_grad()) {
        track = true;
        break;
      }
    }
  }
  if (track) {
    node->requires_grad = true;
    node->grad.assign(node->value.size(), 0.0);
    node->backward = std::move(backward);
    for (const Tensor& in : inputs) node->parents.push_back(in.node());
    Tensor out(node);
    tape->record(std::move(node));
    return out;
  }
  return Tensor(std::move(node));
}

namespace {

std::vector<double>* grad_of(detail::Node& n, std::size_t parent) {
  detail::Node& p = *n.parents[parent];
  return p.requires_grad ? &p.grad : nullptr;
}

}  // namespace

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  const auto &av = a.values(), &bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op("add", a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* g = grad_of(n, p)) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  const auto &av = a.values(), &bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op("sub", a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
    }
    if (auto* g = grad_of(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  const auto &av = a.values(), &bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op("mul", a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * bv[i];
    }
    if (auto* g = grad_of(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  return make_op("scale", a.shape(), std::move(out), {a}, [c](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * c;
    }
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
  return make_op("add_scalar", a.shape(), std::move(out), {a}, [](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
    }
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return make_op("relu", a.shape(), std::move(out), {a}, [](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      const auto& av = n.parents[0]->value;
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        if (av[i] > 0.0) (*g)[i] += n.grad[i];
      }
    }
  });
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * av[i];
  return make_op("square", a.shape(), std::move(out), {a}, [](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      const auto& av = n.parents[0]->value;
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += 2.0 * av[i] * n.grad[i];
    }
  });
}

Tensor sqrt_elem(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (av[i] < 0.0) throw NumericError("sqrt_elem of a negative value");
    out[i] = std::sqrt(av[i]);
  }
  return make_op("sqrt", a.shape(), std::move(out), {a}, [](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      // Subgradient 0 at the origin; the true derivative diverges there.
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        if (n.value[i] > 0.0) (*g)[i] += 0.5 / n.value[i] * n.grad[i];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  return make_op("sum", {1, 1}, {s}, {a}, [](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (double& gi : *g) gi += n.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  double inv = 1.0 / static_cast<double>(a.size());
  return make_op("mean", {1, 1}, {s * inv}, {a}, [inv](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (double& gi : *g) gi += n.grad[0] * inv;
    }
  });
}

// --- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw ShapeError("matmul inner dimensions disagree: " + format_shape(a.shape()) +
                     " vs " + format_shape(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto &av = a.values(), &bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& nd) {
    const auto &av = nd.parents[0]->value, &bv = nd.parents[1]->value;
    if (auto* ga = grad_of(nd, 0)) {
      // dA = dY · B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += nd.grad[i * n + j] * bv[p * n + j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = grad_of(nd, 1)) {
      // dB = A^T · dY
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) acc += av[i * k + p] * nd.grad[i * n + j];
          (*gb)[p * n + j] += acc;
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(r * c);
  const auto& av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  }
  return make_op("transpose", {c, r}, std::move(out), {a}, [r, c](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += n.grad[j * r + i];
      }
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2("softmax_rows", x);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  const auto& xv = x.values();
  check_finite("softmax_rows(input)", xv);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = xv[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(xv[i * c + j] - mx);
      denom += out[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= denom;
  }
  return make_op("softmax_rows", x.shape(), std::move(out), {x}, [r, c](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += n.grad[i * c + j] * n.value[i * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          (*g)[i * c + j] += n.value[i * c + j] * (n.grad[i * c + j] - dot);
        }
      }
    }
  });
}

Tensor conv1d_causal(const Tensor& x, const Tensor& w, std::size_t dilation) {
  if (dilation < 1) throw ParameterError("conv1d_causal requires dilation >= 1");
  require_rank2("conv1d_causal(x)", x);
  if (w.shape().size() != 3) {
    throw ShapeError("conv1d_causal expects weights of shape [C_out x C_in x K], got " +
                     format_shape(w.shape()));
  }
  const std::size_t cin = x.shape()[0], t_len = x.shape()[1];
  const std::size_t cout = w.shape()[0], wcin = w.shape()[1], k = w.shape()[2];
  if (k < 1) throw ParameterError("conv1d_causal requires kernel size >= 1");
  if (wcin != cin) {
    throw ShapeError("conv1d_causal channel mismatch: input " + format_shape(x.shape()) +
                     " vs weight " + format_shape(w.shape()));
  }
  const auto &xv = x.values(), &wv = w.values();
  std::vector<double> out(cout * t_len, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t t = 0; t < t_len; ++t) {
      double acc = 0.0;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::size_t back = kk * dilation;
          if (back > t) break;  // left zero padding
          acc += xv[ci * t_len + (t - back)] * wv[(o * cin + ci) * k + kk];
        }
      }
      out[o * t_len + t] = acc;
    }
  }
  return make_op("conv1d_causal", {cout, t_len}, std::move(out), {x, w},
                 [cin, cout, t_len, k, dilation](detail::Node& n) {
                   const auto& xv = n.parents[0]->value;
                   const auto& wv = n.parents[1]->value;
                   auto* gx = grad_of(n, 0);
                   auto* gw = grad_of(n, 1);
                   for (std::size_t o = 0; o < cout; ++o) {
                     for (std::size_t t = 0; t < t_len; ++t) {
                       const double gy = n.grad[o * t_len + t];
                       if (gy == 0.0) continue;
                       for (std::size_t ci = 0; ci < cin; ++ci) {
                         for (std::size_t kk = 0; kk < k; ++kk) {
                           const std::size_t back = kk * dilation;
                           if (back > t) break;
                           const std::size_t xi = ci * t_len + (t - back);
                           const std::size_t wi = (o * cin + ci) * k + kk;
                           if (gx) (*gx)[xi] += gy * wv[wi];
                           if (gw) (*gw)[wi] += gy * xv[xi];
                         }
                       }
                     }
                   }
                 });
}

// --- shape ops ---------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw ShapeError("reshape " + format_shape(a.shape()) + " -> " + format_shape(shape) +
                     " changes the element count");
  }
  return make_op("reshape", std::move(shape), a.values(), {a}, [](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  require_rank2("slice_rows", a);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (r0 >= r1 || r1 > r) throw ShapeError("slice_rows range out of bounds");
  std::vector<double> out(a.values().begin() + r0 * c, a.values().begin() + r1 * c);
  return make_op("slice_rows", {r1 - r0, c}, std::move(out), {a}, [r0, c](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[r0 * c + i] += n.grad[i];
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  require_rank2("slice_cols", a);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (c0 >= c1 || c1 > c) throw ShapeError("slice_cols range out of bounds");
  const std::size_t w = c1 - c0;
  std::vector<double> out(r * w);
  const auto& av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + c0 + j];
  }
  return make_op("slice_cols", {r, w}, std::move(out), {a}, [r, c, c0, w](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < w; ++j) (*g)[i * c + c0 + j] += n.grad[i * w + j];
      }
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of zero tensors");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != r) throw ShapeError("concat_cols row mismatch");
    total += p.cols();
  }
  std::vector<double> out(r * total);
  std::vector<std::size_t> widths;
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    widths.push_back(w);
    const auto& pv = p.values();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < w; ++j) out[i * total + off + j] = pv[i * w + j];
    }
    off += w;
  }
  return make_op("concat_cols", {r, total}, std::move(out), parts,
                 [r, total, widths = std::move(widths)](detail::Node& n) {
                   std::size_t off = 0;
                   for (std::size_t pi = 0; pi < n.parents.size(); ++pi) {
                     const std::size_t w = widths[pi];
                     if (n.parents[pi]->requires_grad) {
                       auto& g = n.parents[pi]->grad;
                       for (std::size_t i = 0; i < r; ++i) {
                         for (std::size_t j = 0; j < w; ++j) {
                           g[i * w + j] += n.grad[i * total + off + j];
                         }
                       }
                     }
                     off += w;
                   }
                 });
}

Tensor broadcast_rows(const Tensor& row, std::size_t nrows) {
  require_rank2("broadcast_rows", row);
  if (row.shape()[0] != 1) {
    throw ShapeError("broadcast_rows expects a [1xC] tensor, got " + format_shape(row.shape()));
  }
  const std::size_t c = row.shape()[1];
  std::vector<double> out(nrows * c);
  const auto& rv = row.values();
  for (std::size_t i = 0; i < nrows; ++i) {
    std::copy(rv.begin(), rv.end(), out.begin() + i * c);
  }
  return make_op("broadcast_rows", {nrows, c}, std::move(out), {row}, [nrows, c](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < nrows; ++i) {
        for (std::size_t j = 0; j < c; ++j) (*g)[j] += n.grad[i * c + j];
      }
    }
  });
}

// --- normalization -----------------------------------------------------------

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::size_t groups, double eps) {
  const std::size_t n = x.size();
  if (groups == 0 || n % groups != 0) {
    throw ConfigError("group_norm: " + std::to_string(groups) + " groups do not divide " +
                      std::to_string(n) + " channels");
  }
  if (gamma.size() != n || beta.size() != n) {
    throw ShapeError("group_norm affine parameters must match the channel count");
  }
  const std::size_t gs = n / groups;
  const auto &xv = x.values(), &gv = gamma.values(), &bv = beta.values();
  std::vector<double> out(n), xhat(n), inv_std(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    double m = 0.0;
    for (std::size_t i = 0; i < gs; ++i) m += xv[g * gs + i];
    m /= static_cast<double>(gs);
    double var = 0.0;
    for (std::size_t i = 0; i < gs; ++i) {
      const double d = xv[g * gs + i] - m;
      var += d * d;
    }
    var /= static_cast<double>(gs);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[g] = is;
    for (std::size_t i = 0; i < gs; ++i) {
      const std::size_t idx = g * gs + i;
      xhat[idx] = (xv[idx] - m) * is;
      out[idx] = gv[idx] * xhat[idx] + bv[idx];
    }
  }
  return make_op("group_norm", x.shape(), std::move(out), {x, gamma, beta},
                 [groups, gs, xh = std::move(xhat), is = std::move(inv_std)](detail::Node& n) {
                   const auto& gv = n.parents[1]->value;
                   auto* gx = grad_of(n, 0);
                   auto* gg = grad_of(n, 1);
                   auto* gb = grad_of(n, 2);
                   for (std::size_t g = 0; g < groups; ++g) {
                     double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                     for (std::size_t i = 0; i < gs; ++i) {
                       const std::size_t idx = g * gs + i;
                       const double dxhat = n.grad[idx] * gv[idx];
                       sum_dxhat += dxhat;
                       sum_dxhat_xhat += dxhat * xh[idx];
                       if (gg) (*gg)[idx] += n.grad[idx] * xh[idx];
                       if (gb) (*gb)[idx] += n.grad[idx];
                     }
                     if (gx) {
                       const double inv_gs = 1.0 / static_cast<double>(gs);
                       for (std::size_t i = 0; i < gs; ++i) {
                         const std::size_t idx = g * gs + i;
                         const double dxhat = n.grad[idx] * gv[idx];
                         (*gx)[idx] += is[g] * (dxhat - inv_gs * sum_dxhat -
                                                xh[idx] * inv_gs * sum_dxhat_xhat);
                       }
                     }
                   }
                 });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  return group_norm(x, gamma, beta, 1, eps);
}

Tensor normalize_stats(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const std::vector<double>& mean_c, const std::vector<double>& var_c,
                       double eps) {
  const std::size_t n = x.size();
  if (gamma.size() != n || beta.size() != n || mean_c.size() != n || var_c.size() != n) {
    throw ShapeError("normalize_stats channel count mismatch");
  }
  const auto &xv = x.values(), &gv = gamma.values(), &bv = beta.values();
  std::vector<double> out(n), inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_std[i] = 1.0 / std::sqrt(var_c[i] + eps);
    out[i] = gv[i] * (xv[i] - mean_c[i]) * inv_std[i] + bv[i];
  }
  return make_op("normalize_stats", x.shape(), std::move(out), {x, gamma, beta},
                 [m = mean_c, is = std::move(inv_std)](detail::Node& n) {
                   const auto& xv = n.parents[0]->value;
                   const auto& gv = n.parents[1]->value;
                   auto* gx = grad_of(n, 0);
                   auto* gg = grad_of(n, 1);
                   auto* gb = grad_of(n, 2);
                   for (std::size_t i = 0; i < n.grad.size(); ++i) {
                     const double xhat = (xv[i] - m[i]) * is[i];
                     if (gx) (*gx)[i] += n.grad[i] * gv[i] * is[i];
                     if (gg) (*gg)[i] += n.grad[i] * xhat;
                     if (gb) (*gb)[i] += n.grad[i];
                   }
                 });
}

Tensor mul_mask(const Tensor& x, std::vector<double> mask) {
  if (mask.size() != x.size()) throw ShapeError("mul_mask size mismatch");
  std::vector<double> out(x.size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return make_op("mul_mask", x.shape(), std::move(out), {x}, [m = std::move(mask)](detail::Node& n) {
    if (auto* g = grad_of(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * m[i];
    }
  });
}

// --- compositions ------------------------------------------------------------

Tensor euclidean(const Tensor& a, const Tensor& b) {
  return sqrt_elem(sum(square(sub(a, b))));
}

Tensor mean_squared(const Tensor& a, const Tensor& b) {
  return mean(square(sub(a, b)));
}

Tensor linear_vec(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

}  // namespace daan
