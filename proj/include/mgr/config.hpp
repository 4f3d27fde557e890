#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mgr/alignment.hpp"
#include "mgr/emotion.hpp"
#include "mgr/synth.hpp"

namespace mgr {

// Single-document run configuration consumed by every training/eval
// subcommand. Defaults: tau = 0.05, D = 256, stage learning rates
// 1e-4/1e-5 (alignment), 1e-3 (classifier), 1e-5 (emotion), AdamW throughout.
struct RunConfig {
  uint64_t seed = 7;
  std::string corpus_dir;
  std::string out_dir = "runs/default";

  // model
  size_t d = 256;
  size_t heads = 4;
  real lambda_init = real(0);
  size_t visual_tokens = 1;
  bool normalize = true;
  real tau = real(0.05);
  std::string kl_direction = "target_to_pred";
  std::string prompt_mode = "adaptive";

  // stage 1
  real align_lr_visual = real(1e-4);
  real align_lr_text = real(1e-5);
  real align_weight_decay = real(0.01);
  size_t align_epochs = 20;
  size_t align_batch = 32;

  // stage 2
  real mgr_lr = real(1e-3);
  real mgr_weight_decay = real(0.01);
  size_t mgr_epochs = 10;
  size_t mgr_batch = 64;
  size_t mgr_hidden = 256;

  // stage 3
  real emotion_lr = real(1e-5);
  real emotion_weight_decay = real(0.01);
  size_t emotion_epochs = 100;
  size_t emotion_batch = 16;
  size_t emotion_dim = 128;
  size_t emotion_depth = 2;
  size_t emotion_heads = 4;
  size_t emotion_ffn_mult = 2;
  size_t emotion_max_len = 64;
  size_t emotion_classes = 2;
  std::string emotion_modality = "textual_prediction";
  double emotion_holdout = 0.2;

  // evaluation
  double eval_holdout = 0.2;
  std::vector<std::pair<size_t, size_t>> confusable_pairs;

  // artifact names, resolved inside out_dir
  std::string align_ckpt = "align.ckpt";
  std::string cls_ckpt = "cls.ckpt";
  std::string emotion_ckpt = "emotion.ckpt";

  void validate() const;  // throws ConfigError with the offending field path
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_json(const RunConfig& cfg);

SynthConfig synth_config_from_json(const nlohmann::json& j, uint64_t* seed_out);
SynthConfig load_synth_config(const std::string& path, uint64_t* seed_out);
nlohmann::json synth_config_json(const SynthConfig& cfg, uint64_t seed);

}  // namespace mgr
