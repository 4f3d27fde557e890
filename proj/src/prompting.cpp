#include "mgr/prompting.hpp"

#include <cmath>

namespace mgr {

AdaptivePrompting::AdaptivePrompting(ParamStore& store, std::string prefix, PromptingConfig cfg,
                                     uint64_t seed)
  : cfg_(cfg) {
  if (cfg_.heads == 0 || cfg_.dim % cfg_.heads != 0)
    throw ConfigError(prefix + ": dim " + std::to_string(cfg_.dim) +
                      " must be divisible by heads " + std::to_string(cfg_.heads));
  head_dim_ = cfg_.dim / cfg_.heads;
  Rng rng(seed);
  auto weight = [&](const std::string& name) {
    return &store.add(prefix + "." + name,
                      uniform_fan_in_init({cfg_.dim, cfg_.dim}, cfg_.dim,
                                          rng.fork(prefix + "." + name)));
  };
  wq_ = weight("wq");
  wk_ = weight("wk");
  wv_ = weight("wv");
  lambda_ = &store.add(prefix + ".lambda", Tensor::scalar(cfg_.lambda_init));
  fnn_w1_ = weight("fnn_w1");
  fnn_b1_ = &store.add(prefix + ".fnn_b1", Tensor::zeros({cfg_.dim}));
  fnn_w2_ = weight("fnn_w2");
  fnn_b2_ = &store.add(prefix + ".fnn_b2", Tensor::zeros({cfg_.dim}));
}

std::vector<Parameter*> AdaptivePrompting::parameters() const {
  return {wq_, wk_, wv_, lambda_, fnn_w1_, fnn_b1_, fnn_w2_, fnn_b2_};
}

Tensor AdaptivePrompting::forward(const Tensor& t_bar, const Tensor& v_tokens,
                                  size_t tokens_per_pair) const {
  if (t_bar.ndim() != 2 || t_bar.cols() != cfg_.dim)
    throw ContractError("adaptive_prompt: text input must be (n, " + std::to_string(cfg_.dim) +
                        "), got " + shape_str(t_bar.shape()));
  if (v_tokens.ndim() != 2 || v_tokens.cols() != cfg_.dim)
    throw ContractError("adaptive_prompt: visual tokens must be (n*L, " +
                        std::to_string(cfg_.dim) + "), got " + shape_str(v_tokens.shape()));
  size_t n = t_bar.rows();
  if (tokens_per_pair == 0 || v_tokens.rows() != n * tokens_per_pair)
    throw ContractError("adaptive_prompt: " + std::to_string(v_tokens.rows()) +
                        " visual tokens cannot pair " + std::to_string(n) + " rows with L = " +
                        std::to_string(tokens_per_pair));

  const real inv_sqrt_dk = real(1) / std::sqrt(static_cast<real>(head_dim_));
  Tensor q_all = matmul(t_bar, wq_->tensor());
  Tensor k_all = matmul(v_tokens, wk_->tensor());
  Tensor v_all = matmul(v_tokens, wv_->tensor());

  std::vector<Tensor> att_rows;
  att_rows.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    Tensor t_i = slice_rows(t_bar, i, 1);
    Tensor q = slice_rows(q_all, i, 1);
    Tensor k = slice_rows(k_all, i * tokens_per_pair, tokens_per_pair);
    Tensor v = slice_rows(v_all, i * tokens_per_pair, tokens_per_pair);
    std::vector<Tensor> head_ctx;
    head_ctx.reserve(cfg_.heads);
    for (size_t h = 0; h < cfg_.heads; ++h) {
      Tensor q_h = slice_cols(q, h * head_dim_, head_dim_);
      Tensor k_h = slice_cols(k, h * head_dim_, head_dim_);
      Tensor v_h = slice_cols(v, h * head_dim_, head_dim_);
      Tensor scores = scale(matmul(q_h, transpose(k_h)), inv_sqrt_dk);
      head_ctx.push_back(matmul(row_softmax(scores), v_h));
    }
    att_rows.push_back(add(t_i, concat_cols(head_ctx)));
  }
  Tensor att = concat_rows(att_rows);

  Tensor fnn_h = gelu(add_rowvec(matmul(att, fnn_w1_->tensor()), fnn_b1_->tensor()));
  Tensor fnn_out = add_rowvec(matmul(fnn_h, fnn_w2_->tensor()), fnn_b2_->tensor());
  return add(t_bar, scale_by(add(att, fnn_out), lambda_->tensor()));
}

}  // namespace mgr
