#pragma once

#include <string>
#include <vector>

#include "mgr/optim.hpp"
#include "mgr/tensor.hpp"

namespace mgr {

struct PromptingConfig {
  size_t dim = 256;
  size_t heads = 4;
  real lambda_init = real(0);
};

// Context-aware prompt enhancement: per clip/label pair, the projected text
// representation attends (multi-head) over that clip's projected visual
// tokens, and the result is gated back into the text representation through
// a learnable lambda. lambda = 0 makes the module an exact identity, so a
// freshly initialized model matches the no-prompt configuration bit for bit.
class AdaptivePrompting {
public:
  AdaptivePrompting(ParamStore& store, std::string prefix, PromptingConfig cfg, uint64_t seed);

  // t_bar: n x D (row i is the text representation paired with clip i).
  // v_tokens: (n * tokens_per_pair) x D projected visual tokens in pair-major
  // order; row i of the output attends only to its own clip's tokens.
  Tensor forward(const Tensor& t_bar, const Tensor& v_tokens, size_t tokens_per_pair) const;

  std::vector<Parameter*> parameters() const;
  size_t heads() const { return cfg_.heads; }
  size_t dim() const { return cfg_.dim; }
  Parameter& lambda() { return *lambda_; }

private:
  PromptingConfig cfg_;
  size_t head_dim_;
  Parameter* wq_;
  Parameter* wk_;
  Parameter* wv_;
  Parameter* lambda_;
  Parameter* fnn_w1_;
  Parameter* fnn_b1_;
  Parameter* fnn_w2_;
  Parameter* fnn_b2_;
};

}  // namespace mgr
