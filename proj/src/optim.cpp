#include "mgr/optim.hpp"

#include <cmath>

namespace mgr {

Parameter::Parameter(std::string name, Tensor value)
  : name_(std::move(name)), value_(std::move(value)) {
  value_.set_requires_grad(true);
}

void Parameter::set_frozen(bool v) {
  frozen_ = v;
  value_.set_requires_grad(!v);
}

void adamw_step(std::span<Parameter* const> params, const AdamWConfig& cfg) {
  for (Parameter* p : params) {
    if (p->frozen())
      throw ContractError("adamw_step: parameter '" + p->name_ + "' is frozen");
    if (!p->value_.has_grad())
      throw ContractError("adamw_step: parameter '" + p->name_ + "' has no gradient");

    auto theta = p->value_.values_mut();
    auto g = p->value_.grad();
    if (p->m_.empty()) {
      p->m_.assign(theta.size(), real(0));
      p->v_.assign(theta.size(), real(0));
    }
    p->step_ += 1;
    const real bc1 = real(1) - static_cast<real>(std::pow(double(cfg.beta1), double(p->step_)));
    const real bc2 = real(1) - static_cast<real>(std::pow(double(cfg.beta2), double(p->step_)));
    const real decay = real(1) - cfg.lr * cfg.weight_decay;
    for (size_t i = 0; i < theta.size(); ++i) {
      p->m_[i] = cfg.beta1 * p->m_[i] + (real(1) - cfg.beta1) * g[i];
      p->v_[i] = cfg.beta2 * p->v_[i] + (real(1) - cfg.beta2) * g[i] * g[i];
      real m_hat = p->m_[i] / bc1;
      real v_hat = p->v_[i] / bc2;
      theta[i] = theta[i] * decay - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->tensor().zero_grad();
}

Parameter& ParamStore::add(std::string name, Tensor value) {
  if (find(name) != nullptr)
    throw ContractError("ParamStore: duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter& ParamStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return *p;
}

const Parameter& ParamStore::at(const std::string& name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

Parameter* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name() == name) return p.get();
  return nullptr;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParamStore::with_prefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (p->name().rfind(prefix, 0) == 0) out.push_back(p.get());
  return out;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->tensor().zero_grad();
}

Tensor uniform_fan_in_init(Shape shape, size_t fan_in, Rng rng) {
  real bound = real(1) / std::sqrt(static_cast<real>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape));
  for (real& v : t.values_mut()) v = static_cast<real>(rng.uniform(-double(bound), double(bound)));
  return t;
}

}  // namespace mgr
