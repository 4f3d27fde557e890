#include "mgr/emotion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mgr {

Modality parse_modality(const std::string& s) {
  if (s == "textual_prediction") return Modality::TextualPrediction;
  if (s == "probability_vector") return Modality::ProbabilityVector;
  if (s == "visual_representation") return Modality::VisualRepresentation;
  throw ConfigError("unknown modality '" + s +
                    "' (expected textual_prediction, probability_vector or "
                    "visual_representation)");
}

std::string modality_str(Modality m) {
  switch (m) {
    case Modality::TextualPrediction: return "textual_prediction";
    case Modality::ProbabilityVector: return "probability_vector";
    case Modality::VisualRepresentation: return "visual_representation";
  }
  return "textual_prediction";
}

EmotionSequence build_sequence(const VideoEmotionRecord& video, const Corpus& corpus,
                               const ClipOutputs& outputs, Modality modality, size_t max_len) {
  if (video.clip_ids.empty())
    throw DataError("video '" + video.video_id + "' has no clips");

  // temporal order by clip_index
  std::vector<std::pair<size_t, std::string>> ordered;
  ordered.reserve(video.clip_ids.size());
  for (const std::string& cid : video.clip_ids)
    ordered.emplace_back(corpus.record_by_clip(cid).clip_index, cid);
  std::sort(ordered.begin(), ordered.end());

  EmotionSequence seq;
  seq.video_id = video.video_id;
  seq.modality = modality;
  seq.emotion_label = video.emotion_label;
  for (const auto& [index, cid] : ordered) {
    if (modality == Modality::VisualRepresentation) {
      auto it = outputs.visual_vecs.find(cid);
      if (it == outputs.visual_vecs.end())
        throw DataError("no visual representation for clip '" + cid + "' of video '" +
                        video.video_id + "'");
      seq.token_vecs.push_back(it->second);
    } else {
      auto it = outputs.predictions.find(cid);
      if (it == outputs.predictions.end())
        throw DataError("no MGR prediction for clip '" + cid + "' of video '" +
                        video.video_id + "'");
      if (modality == Modality::TextualPrediction)
        seq.token_ids.push_back(it->second.predicted_label);
      else
        seq.token_vecs.push_back(it->second.probs);
    }
  }
  if (seq.length() > max_len) {
    log_info("video '" + video.video_id + "' has " + std::to_string(seq.length()) +
             " clips, truncating to " + std::to_string(max_len));
    if (modality == Modality::TextualPrediction)
      seq.token_ids.resize(max_len);
    else
      seq.token_vecs.resize(max_len);
  }
  return seq;
}

// EmotionModel ----------------------------------------------------------------

namespace {

Tensor sinusoidal_encoding(size_t rows, size_t dim) {
  Tensor pe = Tensor::zeros({rows, dim});
  auto v = pe.values_mut();
  for (size_t pos = 0; pos < rows; ++pos) {
    for (size_t i = 0; i < dim; i += 2) {
      double angle = double(pos) / std::pow(10000.0, double(i) / double(dim));
      v[pos * dim + i] = real(std::sin(angle));
      if (i + 1 < dim) v[pos * dim + i + 1] = real(std::cos(angle));
    }
  }
  return pe;
}

}  // namespace

EmotionModel::EmotionModel(EmotionModelConfig cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg_.dim % cfg_.heads != 0)
    throw ConfigError("emotion.dim " + std::to_string(cfg_.dim) +
                      " must be divisible by emotion.heads " + std::to_string(cfg_.heads));
  if (cfg_.modality == Modality::TextualPrediction && cfg_.gesture_classes == 0)
    throw ConfigError("emotion model in textual modality needs gesture_classes > 0");
  if (cfg_.modality != Modality::TextualPrediction && cfg_.vec_dim == 0)
    throw ConfigError("emotion model in vector modalities needs vec_dim > 0");

  Rng rng(seed);
  auto matrix = [&](const std::string& name, size_t r, size_t c, size_t fan_in) {
    return &store_.add("emotion." + name,
                       uniform_fan_in_init({r, c}, fan_in, rng.fork("emotion." + name)));
  };
  if (cfg_.modality == Modality::TextualPrediction) {
    matrix("embed", cfg_.gesture_classes, cfg_.dim, cfg_.dim);
  } else {
    matrix("adapter_w", cfg_.vec_dim, cfg_.dim, cfg_.vec_dim);
    store_.add("emotion.adapter_b", Tensor::zeros({cfg_.dim}));
  }
  store_.add("emotion.class_token",
             uniform_fan_in_init({1, cfg_.dim}, cfg_.dim, rng.fork("emotion.class_token")));
  size_t ffn_dim = cfg_.ffn_mult * cfg_.dim;
  for (size_t b = 0; b < cfg_.depth; ++b) {
    std::string p = "block" + std::to_string(b) + ".";
    matrix(p + "wq", cfg_.dim, cfg_.dim, cfg_.dim);
    matrix(p + "wk", cfg_.dim, cfg_.dim, cfg_.dim);
    matrix(p + "wv", cfg_.dim, cfg_.dim, cfg_.dim);
    matrix(p + "wo", cfg_.dim, cfg_.dim, cfg_.dim);
    store_.add("emotion." + p + "ln1_g", Tensor::full({cfg_.dim}, real(1)));
    store_.add("emotion." + p + "ln1_b", Tensor::zeros({cfg_.dim}));
    store_.add("emotion." + p + "ln2_g", Tensor::full({cfg_.dim}, real(1)));
    store_.add("emotion." + p + "ln2_b", Tensor::zeros({cfg_.dim}));
    matrix(p + "ffn_w1", cfg_.dim, ffn_dim, cfg_.dim);
    store_.add("emotion." + p + "ffn_b1", Tensor::zeros({ffn_dim}));
    matrix(p + "ffn_w2", ffn_dim, cfg_.dim, ffn_dim);
    store_.add("emotion." + p + "ffn_b2", Tensor::zeros({cfg_.dim}));
  }
  store_.add("emotion.ln_f_g", Tensor::full({cfg_.dim}, real(1)));
  store_.add("emotion.ln_f_b", Tensor::zeros({cfg_.dim}));
  matrix("head_w", cfg_.dim, cfg_.emotions, cfg_.dim);
  store_.add("emotion.head_b", Tensor::zeros({cfg_.emotions}));

  positional_ = sinusoidal_encoding(cfg_.max_len + 1, cfg_.dim);
}

Tensor EmotionModel::embed(const EmotionSequence& seq) const {
  if (seq.modality != cfg_.modality)
    throw ContractError("sequence modality " + modality_str(seq.modality) +
                        " does not match model modality " + modality_str(cfg_.modality));
  if (seq.length() == 0)
    throw DataError("video '" + seq.video_id + "' produced an empty sequence");
  if (seq.length() > cfg_.max_len)
    throw ContractError("sequence for video '" + seq.video_id + "' exceeds max_len " +
                        std::to_string(cfg_.max_len));
  if (cfg_.modality == Modality::TextualPrediction)
    return embedding_lookup(store_.at("emotion.embed").tensor(), seq.token_ids);

  size_t t = seq.token_vecs.size();
  Tensor tokens = Tensor::zeros({t, cfg_.vec_dim});
  auto tv = tokens.values_mut();
  for (size_t i = 0; i < t; ++i) {
    if (seq.token_vecs[i].size() != cfg_.vec_dim)
      throw ContractError("token " + std::to_string(i) + " of video '" + seq.video_id +
                          "' has width " + std::to_string(seq.token_vecs[i].size()) +
                          ", model wants " + std::to_string(cfg_.vec_dim));
    std::copy(seq.token_vecs[i].begin(), seq.token_vecs[i].end(), tv.begin() + i * cfg_.vec_dim);
  }
  return add_rowvec(matmul(tokens, store_.at("emotion.adapter_w").tensor()),
                    store_.at("emotion.adapter_b").tensor());
}

Tensor EmotionModel::block(const Tensor& x, size_t index) const {
  const ParamStore& store = store_;
  std::string p = "emotion.block" + std::to_string(index) + ".";
  size_t head_dim = cfg_.dim / cfg_.heads;
  const real inv_sqrt_dk = real(1) / std::sqrt(static_cast<real>(head_dim));

  Tensor h = layer_norm_rows(x, store.at(p + "ln1_g").tensor(), store.at(p + "ln1_b").tensor());
  Tensor q = matmul(h, store.at(p + "wq").tensor());
  Tensor k = matmul(h, store.at(p + "wk").tensor());
  Tensor v = matmul(h, store.at(p + "wv").tensor());
  std::vector<Tensor> heads;
  heads.reserve(cfg_.heads);
  for (size_t hd = 0; hd < cfg_.heads; ++hd) {
    Tensor q_h = slice_cols(q, hd * head_dim, head_dim);
    Tensor k_h = slice_cols(k, hd * head_dim, head_dim);
    Tensor v_h = slice_cols(v, hd * head_dim, head_dim);
    Tensor scores = scale(matmul(q_h, transpose(k_h)), inv_sqrt_dk);
    heads.push_back(matmul(row_softmax(scores), v_h));
  }
  Tensor attended = matmul(concat_cols(heads), store.at(p + "wo").tensor());
  Tensor x1 = add(x, attended);

  Tensor h2 = layer_norm_rows(x1, store.at(p + "ln2_g").tensor(), store.at(p + "ln2_b").tensor());
  Tensor f = gelu(add_rowvec(matmul(h2, store.at(p + "ffn_w1").tensor()),
                             store.at(p + "ffn_b1").tensor()));
  Tensor ffn = add_rowvec(matmul(f, store.at(p + "ffn_w2").tensor()),
                          store.at(p + "ffn_b2").tensor());
  return add(x1, ffn);
}

Tensor EmotionModel::encode(const EmotionSequence& seq) const {
  Tensor tokens = embed(seq);
  Tensor x = concat_rows({store_.at("emotion.class_token").tensor(), tokens});
  if (cfg_.positional) x = add(x, slice_rows(positional_, 0, x.rows()));
  for (size_t b = 0; b < cfg_.depth; ++b) x = block(x, b);
  return layer_norm_rows(x, store_.at("emotion.ln_f_g").tensor(),
                         store_.at("emotion.ln_f_b").tensor());
}

Tensor EmotionModel::readout(const Tensor& hidden) const {
  Tensor cls = slice_rows(hidden, 0, 1);
  return add_rowvec(matmul(cls, store_.at("emotion.head_w").tensor()),
                    store_.at("emotion.head_b").tensor());
}

Tensor EmotionModel::logits(const EmotionSequence& seq) const { return readout(encode(seq)); }

// Training ----------------------------------------------------------------------

EmotionResult emotion_train(EmotionModel& model, std::span<const EmotionSequence> train,
                            std::span<const EmotionSequence> test,
                            const EmotionTrainConfig& cfg, uint64_t seed) {
  std::set<std::string> train_videos;
  for (const auto& s : train) train_videos.insert(s.video_id);
  for (const auto& s : test)
    if (train_videos.count(s.video_id))
      throw ConfigError("video '" + s.video_id + "' appears in both emotion splits");
  if (train.empty()) throw ContractError("emotion_train: empty training split");

  std::vector<Parameter*> group = model.store().all();
  AdamWConfig opt{cfg.lr, real(0.9), real(0.999), real(1e-8), cfg.weight_decay};

  EmotionResult result;
  size_t step = 0;
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : epoch_batches(train.size(), cfg.batch_size, seed, epoch, true)) {
      std::vector<Tensor> losses;
      losses.reserve(batch.size());
      for (size_t i : batch) {
        const EmotionSequence& seq = train[i];
        Tensor lg = model.logits(seq);
        losses.push_back(cross_entropy_with_logits(lg, {seq.emotion_label}));
      }
      Tensor loss = losses.size() == 1 ? losses[0] : mean(concat_rows([&] {
        std::vector<Tensor> rows;
        rows.reserve(losses.size());
        for (auto& l : losses) rows.push_back(reshape(l, {1, 1}));
        return rows;
      }()));
      double loss_value = double(loss.item());
      if (!std::isfinite(loss_value))
        throw TrainError("emotion loss diverged (non-finite) at step " + std::to_string(step));
      backward(loss);
      adamw_step(group, opt);
      model.store().zero_grad();
      result.trace.push_back({step, loss_value});
      ++step;
    }
  }
  result.train_top1 = emotion_accuracy(model, train);
  result.test_top1 = test.empty() ? 0.0 : emotion_accuracy(model, test);
  return result;
}

double emotion_accuracy(const EmotionModel& model, std::span<const EmotionSequence> seqs) {
  if (seqs.empty()) throw ContractError("emotion_accuracy: empty evaluation set");
  NoGradGuard no_grad;
  size_t hits = 0;
  for (const auto& seq : seqs) {
    Tensor lg = model.logits(seq);
    auto v = lg.values();
    size_t best = 0;
    for (size_t c = 1; c < v.size(); ++c)
      if (v[c] > v[best]) best = c;
    if (best == seq.emotion_label) ++hits;
  }
  return 100.0 * double(hits) / double(seqs.size());
}

}  // namespace mgr
