#include "mgr/mgr_head.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace mgr {

MlpClassifier::MlpClassifier(ParamStore& store, std::string prefix, size_t input_dim,
                             size_t hidden, size_t classes, uint64_t seed)
  : input_dim_(input_dim), classes_(classes) {
  if (hidden == 0 || classes == 0)
    throw ConfigError(prefix + ": classifier dimensions must be positive");
  Rng rng(seed);
  w1_ = &store.add(prefix + ".w1", uniform_fan_in_init({input_dim, hidden}, input_dim,
                                                       rng.fork(prefix + ".w1")));
  b1_ = &store.add(prefix + ".b1", Tensor::zeros({hidden}));
  w2_ = &store.add(prefix + ".w2",
                   uniform_fan_in_init({hidden, classes}, hidden, rng.fork(prefix + ".w2")));
  b2_ = &store.add(prefix + ".b2", Tensor::zeros({classes}));
}

Tensor MlpClassifier::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.cols() != input_dim_)
    throw ContractError("classifier expects (n, " + std::to_string(input_dim_) +
                        ") input, got " + shape_str(x.shape()));
  Tensor h = gelu(add_rowvec(matmul(x, w1_->tensor()), b1_->tensor()));
  return add_rowvec(matmul(h, w2_->tensor()), b2_->tensor());
}

FinetuneResult finetune_classifier(AlignModel& aligned, MlpClassifier& clf,
                                   const Corpus& corpus, std::span<const size_t> train_idx,
                                   const FinetuneConfig& cfg, uint64_t seed) {
  for (Parameter* p : aligned.visual_parameters())
    if (!p->frozen())
      throw ContractError("finetune: aligned visual parameter '" + p->name() +
                          "' must be frozen during stage 2");

  std::vector<Parameter*> group;
  for (Parameter* p : clf.parameters()) group.push_back(p);
  AdamWConfig opt{cfg.lr, real(0.9), real(0.999), real(1e-8), cfg.weight_decay};

  FinetuneResult result;
  size_t step = 0;
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : epoch_batches(train_idx.size(), cfg.batch_size, seed, epoch, true)) {
      std::vector<size_t> record_idx(batch.size());
      std::vector<size_t> labels(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) {
        record_idx[i] = train_idx[batch[i]];
        labels[i] = corpus.records[record_idx[i]].label_id;
      }
      Tensor raw = AlignModel::gather_visual(corpus, record_idx);
      Tensor pooled = aligned.project_visual(raw).pooled;  // frozen pathway, no tape
      Tensor logits = clf.forward(pooled);
      Tensor loss = cross_entropy_with_logits(logits, labels);
      double loss_value = double(loss.item());
      if (!std::isfinite(loss_value))
        throw TrainError("classifier loss diverged (non-finite) at step " + std::to_string(step));
      backward(loss);
      adamw_step(group, opt);
      zero_grad(group);
      result.trace.push_back({step, loss_value});
      ++step;
    }
  }
  return result;
}

std::vector<MgrPrediction> predict_mgr(AlignModel& aligned, const MlpClassifier& clf,
                                       const Corpus& corpus, std::span<const size_t> idx) {
  NoGradGuard no_grad;
  std::vector<MgrPrediction> out;
  out.reserve(idx.size());
  Tensor raw = AlignModel::gather_visual(corpus, idx);
  Tensor pooled = aligned.project_visual(raw).pooled;
  Tensor logits = clf.forward(pooled);
  Tensor probs = row_softmax(logits);
  size_t classes = clf.classes();
  for (size_t i = 0; i < idx.size(); ++i) {
    MgrPrediction pred;
    pred.clip_id = corpus.records[idx[i]].clip_id;
    pred.logits.assign(logits.values().begin() + i * classes,
                       logits.values().begin() + (i + 1) * classes);
    pred.probs.assign(probs.values().begin() + i * classes,
                      probs.values().begin() + (i + 1) * classes);
    size_t best = 0;
    for (size_t c = 1; c < classes; ++c)
      if (pred.logits[c] > pred.logits[best]) best = c;
    pred.predicted_label = best;
    pred.predicted_name = corpus.vocab.classes[best].name;
    out.push_back(std::move(pred));
  }
  return out;
}

void write_predictions_jsonl(const std::vector<MgrPrediction>& preds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const MgrPrediction& p : preds) {
    nlohmann::json row;
    row["clip_id"] = p.clip_id;
    row["label_id"] = p.predicted_label;
    row["label_name"] = p.predicted_name;
    nlohmann::json probs = nlohmann::json::array();
    for (real v : p.probs) probs.push_back(double(v));
    row["probs"] = probs;
    out << row.dump() << "\n";
  }
}

}  // namespace mgr
