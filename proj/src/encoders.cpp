#include "mgr/encoders.hpp"

#include <algorithm>

namespace mgr {

ProjectionHead::ProjectionHead(ParamStore& store, std::string prefix, ProjectionConfig cfg,
                               uint64_t seed)
  : cfg_(cfg) {
  if (cfg_.input_dim == 0 || cfg_.output_dim == 0)
    throw ConfigError(prefix + ": projection dimensions must be positive");
  if (cfg_.hidden == 0) cfg_.hidden = std::max(cfg_.input_dim, cfg_.output_dim);
  Rng rng(seed);
  w1_ = &store.add(prefix + ".w1",
                   uniform_fan_in_init({cfg_.input_dim, cfg_.hidden}, cfg_.input_dim,
                                       rng.fork(prefix + ".w1")));
  b1_ = &store.add(prefix + ".b1", Tensor::zeros({cfg_.hidden}));
  w2_ = &store.add(prefix + ".w2",
                   uniform_fan_in_init({cfg_.hidden, cfg_.output_dim}, cfg_.hidden,
                                       rng.fork(prefix + ".w2")));
  b2_ = &store.add(prefix + ".b2", Tensor::zeros({cfg_.output_dim}));
}

Tensor ProjectionHead::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.cols() != cfg_.input_dim)
    throw ContractError("projection expects (n, " + std::to_string(cfg_.input_dim) +
                        ") input, got " + shape_str(x.shape()));
  Tensor h = gelu(add_rowvec(matmul(x, w1_->tensor()), b1_->tensor()));
  return add_rowvec(matmul(h, w2_->tensor()), b2_->tensor());
}

void ProjectionHead::set_frozen(bool v) {
  for (Parameter* p : parameters()) p->set_frozen(v);
}

Tensor text_matrix(const LabelVocabulary& vocab, const std::string& template_id) {
  size_t c = vocab.size();
  size_t d = vocab.text_dim();
  Tensor out = Tensor::zeros({c, d});
  auto vals = out.values_mut();
  for (size_t i = 0; i < c; ++i) {
    const auto& vec = vocab.text(i, template_id);
    std::copy(vec.begin(), vec.end(), vals.begin() + i * d);
  }
  return out;
}

Tensor text_matrix_for_labels(const LabelVocabulary& vocab, const std::string& template_id,
                              std::span<const size_t> labels) {
  size_t d = vocab.text_dim();
  Tensor out = Tensor::zeros({labels.size(), d});
  auto vals = out.values_mut();
  for (size_t i = 0; i < labels.size(); ++i) {
    const auto& vec = vocab.text(labels[i], template_id);
    std::copy(vec.begin(), vec.end(), vals.begin() + i * d);
  }
  return out;
}

}  // namespace mgr
