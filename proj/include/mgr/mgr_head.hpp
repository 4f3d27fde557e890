#pragma once

#include <string>
#include <vector>

#include "mgr/alignment.hpp"

namespace mgr {

// Two-layer MLP classifier (D -> hidden -> C, GELU between) fine-tuned on
// top of the frozen aligned visual pathway.
class MlpClassifier {
public:
  MlpClassifier(ParamStore& store, std::string prefix, size_t input_dim, size_t hidden,
                size_t classes, uint64_t seed);

  Tensor forward(const Tensor& x) const;  // n x input_dim -> n x classes
  size_t classes() const { return classes_; }
  std::vector<Parameter*> parameters() const { return {w1_, b1_, w2_, b2_}; }

private:
  size_t input_dim_;
  size_t classes_;
  Parameter* w1_;
  Parameter* b1_;
  Parameter* w2_;
  Parameter* b2_;
};

struct MgrPrediction {
  std::string clip_id;
  std::vector<real> logits;
  std::vector<real> probs;  // softmax of logits
  size_t predicted_label = 0;
  std::string predicted_name;
};

struct FinetuneConfig {
  real lr = real(1e-3);
  real weight_decay = real(0.01);
  size_t epochs = 10;
  size_t batch_size = 64;
};

struct FinetuneResult {
  std::vector<TraceRow> trace;
};

// Stage-2 training: the aligned visual pathway must already be frozen; only
// classifier parameters take optimizer steps.
FinetuneResult finetune_classifier(AlignModel& aligned, MlpClassifier& clf,
                                   const Corpus& corpus, std::span<const size_t> train_idx,
                                   const FinetuneConfig& cfg, uint64_t seed);

std::vector<MgrPrediction> predict_mgr(AlignModel& aligned, const MlpClassifier& clf,
                                       const Corpus& corpus, std::span<const size_t> idx);

void write_predictions_jsonl(const std::vector<MgrPrediction>& preds, const std::string& path);

}  // namespace mgr
