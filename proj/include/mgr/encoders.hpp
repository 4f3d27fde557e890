#pragma once

#include <span>
#include <string>
#include <vector>

#include "mgr/dataio.hpp"
#include "mgr/optim.hpp"
#include "mgr/tensor.hpp"

namespace mgr {

struct ProjectionConfig {
  size_t input_dim = 0;
  size_t output_dim = 256;
  size_t hidden = 0;  // 0 -> max(input_dim, output_dim)
};

// Trainable projection head: two affine maps with GELU between, taking raw
// backbone features into the shared D-dimensional space. The backbones
// themselves are frozen upstream of the feature files, so these heads are
// the trainable boundary of each encoder.
class ProjectionHead {
public:
  ProjectionHead(ParamStore& store, std::string prefix, ProjectionConfig cfg, uint64_t seed);

  Tensor forward(const Tensor& x) const;  // n x input_dim -> n x output_dim

  size_t input_dim() const { return cfg_.input_dim; }
  size_t output_dim() const { return cfg_.output_dim; }
  std::vector<Parameter*> parameters() const { return {w1_, b1_, w2_, b2_}; }
  void set_frozen(bool v);

private:
  ProjectionConfig cfg_;
  Parameter* w1_;
  Parameter* b1_;
  Parameter* w2_;
  Parameter* b2_;
};

// Constant (non-trainable) raw text matrices from the vocabulary.
Tensor text_matrix(const LabelVocabulary& vocab, const std::string& template_id);
Tensor text_matrix_for_labels(const LabelVocabulary& vocab, const std::string& template_id,
                              std::span<const size_t> labels);

}  // namespace mgr
