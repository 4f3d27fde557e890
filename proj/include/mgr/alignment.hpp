#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mgr/dataio.hpp"
#include "mgr/encoders.hpp"
#include "mgr/prompting.hpp"

namespace mgr {

// Batch-level ground-truth matrix: GT[i,j] = 1 iff labels[i] == labels[j].
Tensor build_gt(std::span<const size_t> labels);

// Similarity logits between projected towers. With normalization enabled
// (the default) rows are L2-normalized before the dot products. s_text is
// the exact transpose of s_visual, built from the same products.
struct SimilarityScores {
  Tensor s_visual;  // n x n, [i][j] = <v_i, t_j> / tau
  Tensor s_text;    // transpose(s_visual)
};
SimilarityScores similarity_scores(const Tensor& v_hat, const Tensor& t_hat, real tau,
                                   bool normalize = true);

// Which side of the KL the (normalized) GT rows sit on.
// Target-to-prediction is the default; the flipped direction is kept for
// ablation.
enum class KlDirection { TargetToPred, PredToTarget };
KlDirection parse_kl_direction(const std::string& s);

// 1/2 [ KL over s_visual rows + KL over s_text rows ], with GT rows
// normalized to distributions and predictions formed by row softmax.
Tensor alignment_loss(const Tensor& s_visual, const Tensor& s_text, const Tensor& gt,
                      KlDirection direction = KlDirection::TargetToPred);

// Model bundle -----------------------------------------------------------------

enum class PromptMode { None, Handcrafted, Adaptive };

// "none" | "handcrafted:<template>" | "adaptive"
PromptMode parse_prompt_mode(const std::string& s, std::string* template_id);
std::string prompt_mode_str(PromptMode mode, const std::string& template_id);

struct AlignModelConfig {
  size_t visual_token_dim = 0;  // per-token raw dimension
  size_t text_dim = 0;
  size_t visual_tokens = 1;  // L
  size_t dim = 256;          // shared projection dimension D
  size_t heads = 4;
  real lambda_init = real(0);
  bool normalize = true;
  real tau = real(0.05);
  PromptMode mode = PromptMode::Adaptive;
  std::string template_id = "base";  // text template the raw vectors come from
};

// The stage-1 towers: visual and text projection heads plus (in adaptive
// mode) the prompting module, all registered in one parameter store.
class AlignModel {
public:
  AlignModel(AlignModelConfig cfg, uint64_t seed);

  struct VisualProjection {
    Tensor tokens;  // (n * L) x D
    Tensor pooled;  // n x D, mean over each clip's tokens
  };
  // raw: n x (L * visual_token_dim), one row per clip as stored in records
  VisualProjection project_visual(const Tensor& raw) const;

  Tensor project_text(const Tensor& raw_text) const;  // rows x text_dim -> rows x D

  // Prompt enhancement of t_bar rows paired with v_tokens; identity unless
  // the model runs in adaptive mode.
  Tensor enhance(const Tensor& t_bar, const Tensor& v_tokens) const;

  static Tensor gather_visual(const Corpus& corpus, std::span<const size_t> idx);

  const AlignModelConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  ProjectionHead& visual_head() { return *visual_head_; }
  ProjectionHead& text_head() { return *text_head_; }
  AdaptivePrompting* prompting() { return prompting_ ? &*prompting_ : nullptr; }
  const AdaptivePrompting* prompting() const { return prompting_ ? &*prompting_ : nullptr; }

  std::vector<Parameter*> visual_parameters() { return store_.with_prefix("visual."); }
  std::vector<Parameter*> text_parameters();  // text head + prompting

private:
  AlignModelConfig cfg_;
  ParamStore store_;
  std::optional<ProjectionHead> visual_head_;
  std::optional<ProjectionHead> text_head_;
  std::optional<AdaptivePrompting> prompting_;
};

// Stage-1 training -----------------------------------------------------------------

struct AlignTrainConfig {
  real lr_visual = real(1e-4);
  real lr_text = real(1e-5);
  real weight_decay = real(0.01);
  size_t epochs = 20;
  size_t batch_size = 32;
  KlDirection kl_direction = KlDirection::TargetToPred;
};

struct TraceRow {
  size_t step;
  double loss;
};

struct AlignResult {
  std::vector<TraceRow> trace;
  double first_epoch_mean_loss = 0;
  double last_epoch_mean_loss = 0;
};

AlignResult align_train(AlignModel& model, const Corpus& corpus,
                        std::span<const size_t> train_idx, const AlignTrainConfig& cfg,
                        uint64_t seed);

// Zero-shot retrieval -----------------------------------------------------------------

// Classes sorted by descending similarity; ties broken by lower class id.
std::vector<size_t> rank_desc(std::span<const real> scores);

struct ZeroShotOutcome {
  std::vector<std::vector<size_t>> rankings;  // per clip, class ids best-first
  std::vector<size_t> labels;                 // true labels, aligned with rankings
  double top1 = 0;                            // percentages
  double top5 = 0;
};

// Ranks every clip in `clip_idx` against all classes. In adaptive mode the
// class text representations are recomputed per clip, conditioned on that
// clip's visual tokens, matching the training-time pairing.
ZeroShotOutcome zero_shot_eval(AlignModel& model, const Corpus& corpus,
                               std::span<const size_t> clip_idx);

// Top-k (%) over stored rankings, optionally restricted to clips whose true
// label is in `restrict_to`.
double ranking_topk(const std::vector<std::vector<size_t>>& rankings,
                    std::span<const size_t> labels, size_t k,
                    const std::set<size_t>* restrict_to = nullptr);

// Visual-only baseline: nearest centroid on raw features, centroids from the
// training split, accuracy (%) on eval clips (optionally restricted by true
// label).
double nearest_centroid_accuracy(const Corpus& corpus, std::span<const size_t> train_idx,
                                 std::span<const size_t> eval_idx,
                                 const std::set<size_t>* restrict_to = nullptr);

}  // namespace mgr
