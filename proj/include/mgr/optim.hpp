#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mgr/rng.hpp"
#include "mgr/tensor.hpp"

namespace mgr {

struct AdamWConfig {
  real lr = real(1e-3);
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real eps = real(1e-8);
  real weight_decay = real(0);
};

// Named trainable leaf with AdamW moment state. Freezing stops the tape at
// the parameter and makes optimizer updates a contract violation.
class Parameter {
public:
  Parameter(std::string name, Tensor value);

  const std::string& name() const { return name_; }
  Tensor& tensor() { return value_; }
  const Tensor& tensor() const { return value_; }
  bool frozen() const { return frozen_; }
  void set_frozen(bool v);
  uint64_t steps() const { return step_; }

private:
  friend void adamw_step(std::span<Parameter* const> params, const AdamWConfig& cfg);
  std::string name_;
  Tensor value_;
  std::vector<real> m_, v_;
  uint64_t step_ = 0;
  bool frozen_ = false;
};

// Decoupled-weight-decay Adam with bias correction; one step per call.
void adamw_step(std::span<Parameter* const> params, const AdamWConfig& cfg);
void zero_grad(std::span<Parameter* const> params);

// Ordered name-unique parameter registry; models register their parameters
// here and checkpoints serialize the whole store.
class ParamStore {
public:
  Parameter& add(std::string name, Tensor value);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  Parameter* find(const std::string& name);

  std::vector<Parameter*> all();
  std::vector<Parameter*> with_prefix(const std::string& prefix);
  const std::vector<std::unique_ptr<Parameter>>& items() const { return params_; }
  size_t size() const { return params_.size(); }
  void zero_grad();

private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weight initialization.
Tensor uniform_fan_in_init(Shape shape, size_t fan_in, Rng rng);

}  // namespace mgr
