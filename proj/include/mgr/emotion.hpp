#pragma once

#include <map>
#include <string>
#include <vector>

#include "mgr/dataio.hpp"
#include "mgr/mgr_head.hpp"
#include "mgr/optim.hpp"

namespace mgr {

// The form in which clip-level MGR results feed the emotion stage.
enum class Modality { TextualPrediction, ProbabilityVector, VisualRepresentation };

Modality parse_modality(const std::string& s);
std::string modality_str(Modality m);

struct EmotionSequence {
  std::string video_id;
  Modality modality = Modality::TextualPrediction;
  std::vector<size_t> token_ids;              // textual modality
  std::vector<std::vector<real>> token_vecs;  // probability / visual modalities
  size_t emotion_label = 0;

  size_t length() const {
    return modality == Modality::TextualPrediction ? token_ids.size() : token_vecs.size();
  }
};

// Per-clip stage-2 outputs used to assemble sequences.
struct ClipOutputs {
  std::map<std::string, MgrPrediction> predictions;
  std::map<std::string, std::vector<real>> visual_vecs;  // pooled aligned features
};

// Tokens assembled in temporal (clip_index) order in the requested modality;
// sequences longer than max_len are truncated to the prefix with a logged
// warning. Missing clip outputs are data errors naming the clip.
EmotionSequence build_sequence(const VideoEmotionRecord& video, const Corpus& corpus,
                               const ClipOutputs& outputs, Modality modality, size_t max_len);

struct EmotionModelConfig {
  Modality modality = Modality::TextualPrediction;
  size_t gesture_classes = 0;  // vocabulary size (textual embedding table)
  size_t vec_dim = 0;          // token width for vector modalities
  size_t dim = 128;            // D_e
  size_t depth = 2;
  size_t heads = 4;
  size_t ffn_mult = 2;
  size_t max_len = 64;
  size_t emotions = 2;
  bool positional = true;  // sinusoidal encoding; disabled only by tests
};

// Sequence classifier: embed tokens, prepend the trainable classification
// token, add the sinusoidal positional encoding, run pre-LN transformer
// blocks and read the class-token position out into emotion logits.
class EmotionModel {
public:
  EmotionModel(EmotionModelConfig cfg, uint64_t seed);

  Tensor encode(const EmotionSequence& seq) const;       // (T+1) x D_e hidden states
  Tensor readout(const Tensor& hidden) const;            // 1 x emotions, row 0 only
  Tensor logits(const EmotionSequence& seq) const;

  const EmotionModelConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

private:
  Tensor embed(const EmotionSequence& seq) const;
  Tensor block(const Tensor& x, size_t index) const;

  EmotionModelConfig cfg_;
  ParamStore store_;
  Tensor positional_;  // (max_len + 1) x D_e constant
};

struct EmotionTrainConfig {
  real lr = real(1e-5);
  real weight_decay = real(0.01);
  size_t epochs = 100;
  size_t batch_size = 16;
};

struct EmotionResult {
  std::vector<TraceRow> trace;
  double train_top1 = 0;  // percentages
  double test_top1 = 0;
};

// Splits must be leakage-free by video id (config error otherwise).
EmotionResult emotion_train(EmotionModel& model, std::span<const EmotionSequence> train,
                            std::span<const EmotionSequence> test,
                            const EmotionTrainConfig& cfg, uint64_t seed);

double emotion_accuracy(const EmotionModel& model, std::span<const EmotionSequence> seqs);

}  // namespace mgr
