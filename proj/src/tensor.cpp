#include "mgr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace mgr {

using detail::Node;

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<Node> make_node(Shape shape) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values.assign(shape_numel(n->shape), real(0));
  return n;
}

bool tape_active(std::initializer_list<const Tensor*> ins) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : ins)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

void attach(const std::shared_ptr<Node>& out, std::vector<std::shared_ptr<Node>> parents,
            std::function<void(Node&)> fn) {
  out->requires_grad = true;
  out->parents = std::move(parents);
  out->backward_fn = std::move(fn);
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

void check_2d(const char* op, const Tensor& t) {
  if (t.ndim() != 2)
    throw DimensionError(std::string(op) + ": expected 2-D tensor, got shape " +
                         shape_str(t.shape()));
}

// C (M x N) += A_logical (M x K) * B_logical (K x N). `ta`/`tb` flag that the
// stored buffer holds the transpose of the logical operand.
void gemm_acc(const real* A, const real* B, real* C, size_t M, size_t K, size_t N,
              bool ta, bool tb) {
  if (!ta && !tb) {
    for (size_t i = 0; i < M; ++i) {
      real* crow = C + i * N;
      const real* arow = A + i * K;
      for (size_t l = 0; l < K; ++l) {
        real a = arow[l];
        const real* brow = B + l * N;
        for (size_t j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  } else if (!ta && tb) {
    for (size_t i = 0; i < M; ++i) {
      const real* arow = A + i * K;
      for (size_t j = 0; j < N; ++j) {
        const real* brow = B + j * K;
        real s = 0;
        for (size_t l = 0; l < K; ++l) s += arow[l] * brow[l];
        C[i * N + j] += s;
      }
    }
  } else if (ta && !tb) {
    for (size_t l = 0; l < K; ++l) {
      const real* acol = A + l * M;
      const real* brow = B + l * N;
      for (size_t i = 0; i < M; ++i) {
        real a = acol[i];
        real* crow = C + i * N;
        for (size_t j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  } else {
    for (size_t i = 0; i < M; ++i) {
      for (size_t j = 0; j < N; ++j) {
        real s = 0;
        for (size_t l = 0; l < K; ++l) s += A[l * M + i] * B[j * K + l];
        C[i * N + j] += s;
      }
    }
  }
}

}  // namespace

// Tensor ---------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) { return Tensor(make_node(std::move(shape))); }

Tensor Tensor::full(Shape shape, real value) {
  auto n = make_node(std::move(shape));
  std::fill(n->values.begin(), n->values.end(), value);
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<real> values) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("from: shape " + shape_str(shape) + " wants " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(real value) { return from({1}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("tensor is undefined");
  return node_->shape;
}

size_t Tensor::numel() const { return node_ ? node_->values.size() : 0; }

size_t Tensor::rows() const {
  check_2d("rows", *this);
  return shape()[0];
}

size_t Tensor::cols() const {
  check_2d("cols", *this);
  return shape()[1];
}

std::span<const real> Tensor::values() const {
  if (!node_) throw ContractError("tensor is undefined");
  return node_->values;
}

std::span<real> Tensor::values_mut() {
  if (!node_) throw ContractError("tensor is undefined");
  return node_->values;
}

real Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item: tensor is not scalar, shape " + shape_str(shape()));
  return node_->values[0];
}

real Tensor::at(size_t r, size_t c) const {
  check_2d("at", *this);
  return node_->values[r * shape()[1] + c];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
  if (!node_) throw ContractError("tensor is undefined");
  node_->requires_grad = v;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const real> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return node_->grad;
}

std::span<real> Tensor::grad_mut() {
  if (!node_) throw ContractError("tensor is undefined");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty())
    std::fill(node_->grad.begin(), node_->grad.end(), real(0));
}

void Tensor::clear_grad() {
  if (node_) node_->grad.clear();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// Elementwise ------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  auto out = make_node(a.shape());
  const auto av = a.values();
  const auto bv = b.values();
  for (size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] + bv[i];
  if (tape_active({&a, &b})) {
    attach(out, {a.node(), b.node()}, [](Node& self) {
      for (int p = 0; p < 2; ++p) {
        Node& par = *self.parents[p];
        if (!par.requires_grad) continue;
        par.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
      }
    });
  }
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  auto out = make_node(a.shape());
  const auto av = a.values();
  const auto bv = b.values();
  for (size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] - bv[i];
  if (tape_active({&a, &b})) {
    attach(out, {a.node(), b.node()}, [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
      }
    });
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  auto out = make_node(a.shape());
  const auto av = a.values();
  const auto bv = b.values();
  for (size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] * bv[i];
  if (tape_active({&a, &b})) {
    attach(out, {a.node(), b.node()}, [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.values[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.values[i];
      }
    });
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, real c) {
  auto out = make_node(a.shape());
  const auto av = a.values();
  for (size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] * c;
  if (tape_active({&a})) {
    attach(out, {a.node()}, [c](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += c * self.grad[i];
    });
  }
  return Tensor(out);
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  check_2d("add_rowvec", m);
  size_t r = m.shape()[0], c = m.shape()[1];
  if (v.numel() != c)
    throw DimensionError("add_rowvec: vector length " + std::to_string(v.numel()) +
                         " does not match columns of " + shape_str(m.shape()));
  auto out = make_node(m.shape());
  const auto mv = m.values();
  const auto vv = v.values();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) out->values[i * c + j] = mv[i * c + j] + vv[j];
  if (tape_active({&m, &v})) {
    attach(out, {m.node(), v.node()}, [r, c](Node& self) {
      Node& pm = *self.parents[0];
      Node& pv = *self.parents[1];
      if (pm.requires_grad) {
        pm.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pm.grad[i] += self.grad[i];
      }
      if (pv.requires_grad) {
        pv.ensure_grad();
        for (size_t i = 0; i < r; ++i)
          for (size_t j = 0; j < c; ++j) pv.grad[j] += self.grad[i * c + j];
      }
    });
  }
  return Tensor(out);
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1)
    throw ContractError("scale_by: scale tensor must hold one element, shape " +
                        shape_str(s.shape()));
  real sv = s.values()[0];
  auto out = make_node(a.shape());
  const auto av = a.values();
  for (size_t i = 0; i < av.size(); ++i) out->values[i] = sv * av[i];
  if (tape_active({&a, &s})) {
    attach(out, {a.node(), s.node()}, [sv](Node& self) {
      Node& pa = *self.parents[0];
      Node& ps = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += sv * self.grad[i];
      }
      if (ps.requires_grad) {
        ps.ensure_grad();
        real acc = 0;
        for (size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa.values[i];
        ps.grad[0] += acc;
      }
    });
  }
  return Tensor(out);
}

// Structural -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d("matmul", a);
  check_2d("matmul", b);
  size_t m = a.shape()[0], k = a.shape()[1];
  if (b.shape()[0] != k)
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  size_t n = b.shape()[1];
  auto out = make_node({m, n});
  gemm_acc(a.values().data(), b.values().data(), out->values.data(), m, k, n, false, false);
  if (tape_active({&a, &b})) {
    attach(out, {a.node(), b.node()}, [m, k, n](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        gemm_acc(self.grad.data(), pb.values.data(), pa.grad.data(), m, n, k, false, true);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        gemm_acc(pa.values.data(), self.grad.data(), pb.grad.data(), k, m, n, true, false);
      }
    });
  }
  return Tensor(out);
}

Tensor transpose(const Tensor& a) {
  check_2d("transpose", a);
  size_t r = a.shape()[0], c = a.shape()[1];
  auto out = make_node({c, r});
  const auto av = a.values();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) out->values[j * r + i] = av[i * c + j];
  if (tape_active({&a})) {
    attach(out, {a.node()}, [r, c](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) pa.grad[i * c + j] += self.grad[j * r + i];
    });
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  auto out = make_node(std::move(shape));
  const auto av = a.values();
  std::copy(av.begin(), av.end(), out->values.begin());
  if (tape_active({&a})) {
    attach(out, {a.node()}, [](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    });
  }
  return Tensor(out);
}

Tensor slice_rows(const Tensor& a, size_t start, size_t count) {
  check_2d("slice_rows", a);
  size_t r = a.shape()[0], c = a.shape()[1];
  if (start + count > r)
    throw DimensionError("slice_rows: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") exceeds " + shape_str(a.shape()));
  auto out = make_node({count, c});
  const auto av = a.values();
  std::copy(av.begin() + start * c, av.begin() + (start + count) * c, out->values.begin());
  if (tape_active({&a})) {
    attach(out, {a.node()}, [start, c](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[start * c + i] += self.grad[i];
    });
  }
  return Tensor(out);
}

Tensor slice_cols(const Tensor& a, size_t start, size_t count) {
  check_2d("slice_cols", a);
  size_t r = a.shape()[0], c = a.shape()[1];
  if (start + count > c)
    throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") exceeds " + shape_str(a.shape()));
  auto out = make_node({r, count});
  const auto av = a.values();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < count; ++j) out->values[i * count + j] = av[i * c + start + j];
  if (tape_active({&a})) {
    attach(out, {a.node()}, [r, c, start, count](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < count; ++j)
          pa.grad[i * c + start + j] += self.grad[i * count + j];
    });
  }
  return Tensor(out);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  check_2d("concat_rows", parts[0]);
  size_t c = parts[0].shape()[1];
  size_t total = 0;
  for (const Tensor& p : parts) {
    check_2d("concat_rows", p);
    if (p.shape()[1] != c)
      throw DimensionError("concat_rows: column mismatch: " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    total += p.shape()[0];
  }
  auto out = make_node({total, c});
  size_t off = 0;
  for (const Tensor& p : parts) {
    const auto pv = p.values();
    std::copy(pv.begin(), pv.end(), out->values.begin() + off);
    off += pv.size();
  }
  bool want = false;
  for (const Tensor& p : parts) want = want || (grad_enabled() && p.requires_grad());
  if (want) {
    std::vector<std::shared_ptr<Node>> parents;
    parents.reserve(parts.size());
    for (const Tensor& p : parts) parents.push_back(p.node());
    attach(out, std::move(parents), [](Node& self) {
      size_t off = 0;
      for (auto& par : self.parents) {
        size_t n = par->values.size();
        if (par->requires_grad) {
          par->ensure_grad();
          for (size_t i = 0; i < n; ++i) par->grad[i] += self.grad[off + i];
        }
        off += n;
      }
    });
  }
  return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  check_2d("concat_cols", parts[0]);
  size_t r = parts[0].shape()[0];
  size_t total = 0;
  for (const Tensor& p : parts) {
    check_2d("concat_cols", p);
    if (p.shape()[0] != r)
      throw DimensionError("concat_cols: row mismatch: " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    total += p.shape()[1];
  }
  auto out = make_node({r, total});
  size_t off = 0;
  for (const Tensor& p : parts) {
    size_t pc = p.shape()[1];
    const auto pv = p.values();
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < pc; ++j) out->values[i * total + off + j] = pv[i * pc + j];
    off += pc;
  }
  bool want = false;
  for (const Tensor& p : parts) want = want || (grad_enabled() && p.requires_grad());
  if (want) {
    std::vector<std::shared_ptr<Node>> parents;
    parents.reserve(parts.size());
    for (const Tensor& p : parts) parents.push_back(p.node());
    attach(out, std::move(parents), [r, total](Node& self) {
      size_t off = 0;
      for (auto& par : self.parents) {
        size_t pc = par->shape[1];
        if (par->requires_grad) {
          par->ensure_grad();
          for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < pc; ++j)
              par->grad[i * pc + j] += self.grad[i * total + off + j];
        }
        off += pc;
      }
    });
  }
  return Tensor(out);
}

// Reductions ---------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  auto out = make_node({1});
  real s = 0;
  for (real v : a.values()) s += v;
  out->values[0] = s;
  if (tape_active({&a})) {
    attach(out, {a.node()}, [](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      real g = self.grad[0];
      for (size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
    });
  }
  return Tensor(out);
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ContractError("mean: empty tensor");
  auto out = make_node({1});
  real s = 0;
  for (real v : a.values()) s += v;
  size_t n = a.numel();
  out->values[0] = s / static_cast<real>(n);
  if (tape_active({&a})) {
    attach(out, {a.node()}, [n](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      real g = self.grad[0] / static_cast<real>(n);
      for (size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
    });
  }
  return Tensor(out);
}

Tensor group_mean_rows(const Tensor& a, size_t group) {
  check_2d("group_mean_rows", a);
  size_t r = a.shape()[0], c = a.shape()[1];
  if (group == 0 || r % group != 0)
    throw ContractError("group_mean_rows: rows " + std::to_string(r) +
                        " not divisible by group " + std::to_string(group));
  size_t g = r / group;
  auto out = make_node({g, c});
  const auto av = a.values();
  for (size_t gi = 0; gi < g; ++gi) {
    for (size_t l = 0; l < group; ++l) {
      const real* row = av.data() + (gi * group + l) * c;
      for (size_t j = 0; j < c; ++j) out->values[gi * c + j] += row[j];
    }
    for (size_t j = 0; j < c; ++j) out->values[gi * c + j] /= static_cast<real>(group);
  }
  if (tape_active({&a})) {
    attach(out, {a.node()}, [g, group, c](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t gi = 0; gi < g; ++gi)
        for (size_t l = 0; l < group; ++l)
          for (size_t j = 0; j < c; ++j)
            pa.grad[(gi * group + l) * c + j] +=
              self.grad[gi * c + j] / static_cast<real>(group);
    });
  }
  return Tensor(out);
}

// Nonlinearities -------------------------------------------------------------------

Tensor relu(const Tensor& a) {
  auto out = make_node(a.shape());
  const auto av = a.values();
  for (size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] > 0 ? av[i] : real(0);
  if (tape_active({&a})) {
    attach(out, {a.node()}, [](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (pa.values[i] > 0) pa.grad[i] += self.grad[i];
    });
  }
  return Tensor(out);
}

Tensor gelu(const Tensor& a) {
  auto out = make_node(a.shape());
  const auto av = a.values();
  const real inv_sqrt2 = real(0.70710678118654752440);
  for (size_t i = 0; i < av.size(); ++i) {
    real x = av[i];
    out->values[i] = real(0.5) * x * (real(1) + std::erf(x * inv_sqrt2));
  }
  if (tape_active({&a})) {
    attach(out, {a.node()}, [inv_sqrt2](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      const real inv_sqrt2pi = real(0.39894228040143267794);
      for (size_t i = 0; i < self.grad.size(); ++i) {
        real x = pa.values[i];
        real cdf = real(0.5) * (real(1) + std::erf(x * inv_sqrt2));
        real pdf = inv_sqrt2pi * std::exp(real(-0.5) * x * x);
        pa.grad[i] += self.grad[i] * (cdf + x * pdf);
      }
    });
  }
  return Tensor(out);
}

Tensor row_softmax(const Tensor& a) {
  check_2d("row_softmax", a);
  size_t r = a.shape()[0], c = a.shape()[1];
  auto out = make_node(a.shape());
  const auto av = a.values();
  for (size_t i = 0; i < r; ++i) {
    const real* row = av.data() + i * c;
    real* orow = out->values.data() + i * c;
    real mx = row[0];
    for (size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    real denom = 0;
    for (size_t j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (size_t j = 0; j < c; ++j) orow[j] /= denom;
  }
  if (tape_active({&a})) {
    attach(out, {a.node()}, [r, c](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t i = 0; i < r; ++i) {
        const real* y = self.values.data() + i * c;
        const real* g = self.grad.data() + i * c;
        real dot = 0;
        for (size_t j = 0; j < c; ++j) dot += g[j] * y[j];
        for (size_t j = 0; j < c; ++j) pa.grad[i * c + j] += y[j] * (g[j] - dot);
      }
    });
  }
  return Tensor(out);
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps) {
  check_2d("layer_norm_rows", x);
  size_t r = x.shape()[0], c = x.shape()[1];
  if (gamma.numel() != c || beta.numel() != c)
    throw DimensionError("layer_norm_rows: gamma/beta length must match columns of " +
                         shape_str(x.shape()));
  auto out = make_node(x.shape());
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<real> xhat(r * c);
  std::vector<real> inv_std(r);
  for (size_t i = 0; i < r; ++i) {
    const real* row = xv.data() + i * c;
    real mu = 0;
    for (size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<real>(c);
    real var = 0;
    for (size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<real>(c);
    real inv = real(1) / std::sqrt(var + eps);
    inv_std[i] = inv;
    for (size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (row[j] - mu) * inv;
      out->values[i * c + j] = gv[j] * xhat[i * c + j] + bv[j];
    }
  }
  if (tape_active({&x, &gamma, &beta})) {
    attach(out, {x.node(), gamma.node(), beta.node()},
           [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
      Node& px = *self.parents[0];
      Node& pg = *self.parents[1];
      Node& pb = *self.parents[2];
      if (pg.requires_grad) {
        pg.ensure_grad();
        for (size_t i = 0; i < r; ++i)
          for (size_t j = 0; j < c; ++j)
            pg.grad[j] += self.grad[i * c + j] * xhat[i * c + j];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (size_t i = 0; i < r; ++i)
          for (size_t j = 0; j < c; ++j) pb.grad[j] += self.grad[i * c + j];
      }
      if (px.requires_grad) {
        px.ensure_grad();
        for (size_t i = 0; i < r; ++i) {
          real mean_dxhat = 0, mean_dxhat_xhat = 0;
          for (size_t j = 0; j < c; ++j) {
            real dxh = self.grad[i * c + j] * pg.values[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[i * c + j];
          }
          mean_dxhat /= static_cast<real>(c);
          mean_dxhat_xhat /= static_cast<real>(c);
          for (size_t j = 0; j < c; ++j) {
            real dxh = self.grad[i * c + j] * pg.values[j];
            px.grad[i * c + j] +=
              inv_std[i] * (dxh - mean_dxhat - xhat[i * c + j] * mean_dxhat_xhat);
          }
        }
      }
    });
  }
  return Tensor(out);
}

Tensor l2_normalize_rows(const Tensor& a, real eps) {
  check_2d("l2_normalize_rows", a);
  size_t r = a.shape()[0], c = a.shape()[1];
  auto out = make_node(a.shape());
  const auto av = a.values();
  std::vector<real> denom(r);
  for (size_t i = 0; i < r; ++i) {
    real s = 0;
    for (size_t j = 0; j < c; ++j) s += av[i * c + j] * av[i * c + j];
    denom[i] = std::max(std::sqrt(s), eps);
    for (size_t j = 0; j < c; ++j) out->values[i * c + j] = av[i * c + j] / denom[i];
  }
  if (tape_active({&a})) {
    attach(out, {a.node()}, [r, c, denom = std::move(denom)](Node& self) {
      Node& pa = *self.parents[0];
      pa.ensure_grad();
      for (size_t i = 0; i < r; ++i) {
        const real* y = self.values.data() + i * c;
        const real* g = self.grad.data() + i * c;
        real dot = 0;
        for (size_t j = 0; j < c; ++j) dot += y[j] * g[j];
        for (size_t j = 0; j < c; ++j)
          pa.grad[i * c + j] += (g[j] - y[j] * dot) / denom[i];
      }
    });
  }
  return Tensor(out);
}

// Losses / lookups --------------------------------------------------------------------

Tensor kl_divergence_rows(const Tensor& target, const Tensor& pred) {
  check_same_shape("kl_divergence_rows", target, pred);
  check_2d("kl_divergence_rows", target);
  size_t r = target.shape()[0], c = target.shape()[1];
  const auto tv = target.values();
  const auto pv = pred.values();
  for (size_t i = 0; i < tv.size(); ++i) {
    if (tv[i] < real(-1e-6) || pv[i] < real(-1e-6))
      throw ContractError("kl_divergence_rows: negative entry in row distributions");
  }
  auto out = make_node({1});
  real acc = 0;
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) {
      real t = tv[i * c + j];
      if (t <= 0) continue;  // 0 * log 0 := 0
      real p = std::max(pv[i * c + j], kKlEps);
      acc += t * (std::log(t) - std::log(p));
    }
  }
  out->values[0] = acc / static_cast<real>(r);
  if (tape_active({&target, &pred})) {
    attach(out, {target.node(), pred.node()}, [r, c](Node& self) {
      Node& pt = *self.parents[0];
      Node& pp = *self.parents[1];
      real g = self.grad[0] / static_cast<real>(r);
      if (pp.requires_grad) {
        pp.ensure_grad();
        for (size_t i = 0; i < r * c; ++i) {
          real t = pt.values[i];
          real p = pp.values[i];
          if (t > 0 && p > kKlEps) pp.grad[i] -= g * t / p;
        }
      }
      if (pt.requires_grad) {
        pt.ensure_grad();
        for (size_t i = 0; i < r * c; ++i) {
          real t = pt.values[i];
          if (t > 0) {
            real p = std::max(pp.values[i], kKlEps);
            pt.grad[i] += g * (std::log(t) - std::log(p) + real(1));
          }
        }
      }
    });
  }
  return Tensor(out);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<size_t>& ids) {
  check_2d("embedding_lookup", table);
  size_t rows = table.shape()[0], d = table.shape()[1];
  for (size_t id : ids)
    if (id >= rows)
      throw ContractError("embedding_lookup: id " + std::to_string(id) +
                          " out of range for table " + shape_str(table.shape()));
  auto out = make_node({ids.size(), d});
  const auto tv = table.values();
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy(tv.begin() + ids[i] * d, tv.begin() + (ids[i] + 1) * d,
              out->values.begin() + i * d);
  if (tape_active({&table})) {
    attach(out, {table.node()}, [ids, d](Node& self) {
      Node& pt = *self.parents[0];
      pt.ensure_grad();
      for (size_t i = 0; i < ids.size(); ++i)
        for (size_t j = 0; j < d; ++j)
          pt.grad[ids[i] * d + j] += self.grad[i * d + j];
    });
  }
  return Tensor(out);
}

Tensor cross_entropy_with_logits(const Tensor& logits, const std::vector<size_t>& labels) {
  check_2d("cross_entropy_with_logits", logits);
  size_t n = logits.shape()[0], c = logits.shape()[1];
  if (labels.size() != n)
    throw ContractError("cross_entropy_with_logits: " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(n) + " rows");
  for (size_t y : labels)
    if (y >= c)
      throw ContractError("cross_entropy_with_logits: label " + std::to_string(y) +
                          " out of range for " + std::to_string(c) + " classes");
  const auto lv = logits.values();
  std::vector<real> probs(n * c);
  real acc = 0;
  for (size_t i = 0; i < n; ++i) {
    const real* row = lv.data() + i * c;
    real mx = row[0];
    for (size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    real denom = 0;
    for (size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      denom += probs[i * c + j];
    }
    for (size_t j = 0; j < c; ++j) probs[i * c + j] /= denom;
    acc -= (row[labels[i]] - mx) - std::log(denom);
  }
  auto out = make_node({1});
  out->values[0] = acc / static_cast<real>(n);
  if (tape_active({&logits})) {
    attach(out, {logits.node()}, [n, c, labels, probs = std::move(probs)](Node& self) {
      Node& pl = *self.parents[0];
      pl.ensure_grad();
      real g = self.grad[0] / static_cast<real>(n);
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < c; ++j) {
          real delta = (j == labels[i]) ? real(1) : real(0);
          pl.grad[i * c + j] += g * (probs[i * c + j] - delta);
        }
    });
  }
  return Tensor(out);
}

// Backward --------------------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward: loss must be a scalar, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  Node* root = loss.node().get();

  // Iterative post-order DFS; post-order gives topological order over parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* next = node->parents[idx++].get();
      if (visited.insert(next).second) stack.emplace_back(next, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior buffers are scratch for this pass; leaf buffers accumulate
  // across passes until zero_grad/clear_grad.
  for (Node* node : order)
    if (node->backward_fn && !node->grad.empty())
      std::fill(node->grad.begin(), node->grad.end(), real(0));

  root->ensure_grad();
  root->grad[0] += real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

}  // namespace mgr
