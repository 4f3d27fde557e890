#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mgr/common.hpp"

namespace mgr {

namespace detail {

struct Node {
  Shape shape;
  std::vector<real> values;
  std::vector<real> grad;  // allocated only once gradients reach this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), real(0));
  }
};

}  // namespace detail

// Dense row-major real array participating in reverse-mode differentiation.
// Copies are cheap and share storage. Ops on tensors record the backward
// rules needed by backward() whenever an input requires gradients and tape
// construction is not disabled via NoGradGuard.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, real value);
  static Tensor from(Shape shape, std::vector<real> values);
  static Tensor scalar(real value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  size_t ndim() const { return shape().size(); }
  size_t numel() const;
  size_t rows() const;  // 2-D only
  size_t cols() const;  // 2-D only

  std::span<const real> values() const;
  std::span<real> values_mut();  // for leaf initialization / optimizer updates
  real item() const;             // scalar tensors
  real at(size_t r, size_t c) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);

  bool has_grad() const;
  std::span<const real> grad() const;
  std::span<real> grad_mut();
  void zero_grad();   // fill existing buffer with zeros
  void clear_grad();  // drop the buffer entirely

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
  std::shared_ptr<detail::Node> node_;
};

// Tape control ------------------------------------------------------------

bool grad_enabled();

// Disables tape construction for the guard's lifetime (evaluation paths).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

// Elementwise / structural ops ---------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);          // elementwise
Tensor scale(const Tensor& a, real c);
Tensor add_rowvec(const Tensor& m, const Tensor& v);   // m: r x c, v: 1 x c or (c)
Tensor scale_by(const Tensor& a, const Tensor& s);     // s: single-element tensor

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, size_t start, size_t count);
Tensor slice_cols(const Tensor& a, size_t start, size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Reductions ----------------------------------------------------------------

Tensor sum(const Tensor& a);   // scalar
Tensor mean(const Tensor& a);  // scalar
// (g*k) x d -> g x d, mean over consecutive groups of k rows
Tensor group_mean_rows(const Tensor& a, size_t group);

// Nonlinearities / normalizations -------------------------------------------

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor row_softmax(const Tensor& a);
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       real eps = real(1e-5));
Tensor l2_normalize_rows(const Tensor& a, real eps = real(1e-12));

// Losses / lookups ----------------------------------------------------------

// Mean over rows of sum_j target[i,j] * log(target[i,j] / pred[i,j]), with
// 0*log 0 := 0 and pred floored at kKlEps inside the log. Rows of both
// arguments must be probability distributions.
Tensor kl_divergence_rows(const Tensor& target, const Tensor& pred);

Tensor embedding_lookup(const Tensor& table, const std::vector<size_t>& ids);
Tensor cross_entropy_with_logits(const Tensor& logits, const std::vector<size_t>& labels);

inline constexpr real kKlEps = real(1e-8);

// Backward -------------------------------------------------------------------

// Reverse-mode pass from a scalar loss. Gradients accumulate into every
// reachable requires_grad tensor; repeated calls without zero_grad/clear_grad
// keep accumulating.
void backward(const Tensor& loss);

}  // namespace mgr
