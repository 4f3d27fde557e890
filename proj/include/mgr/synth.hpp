#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mgr/dataio.hpp"

namespace mgr {

// Synthetic corpus generator. Confusable class pairs share a visual centroid
// and are told apart only by sub-cluster structure in a low-noise signal
// subspace, so a plain nearest-centroid read of the raw features confuses
// them while their text vectors stay well separated.
struct SynthConfig {
  size_t classes = 10;
  size_t clips_per_class = 200;
  size_t token_dim = 24;   // per-token visual dimension
  size_t text_dim = 16;
  size_t visual_tokens = 1;
  double cluster_spread = 1.0;   // scales all visual noise
  double centroid_radius = 6.0;
  double pair_mode_offset = 3.0; // sub-cluster offset for confusable classes
  double signal_noise = 0.15;    // noise ratio inside the signal subspace
  double token_jitter = 0.1;
  size_t signal_dims = 8;
  std::vector<std::pair<size_t, size_t>> confusable_pairs;
  size_t clips_per_video = 7;
  std::string emotion_rule = "majority_even";
  size_t emotion_classes = 2;
  double template_offset = 0.25;

  void validate() const;  // throws ConfigError
};

struct SynthCorpus {
  std::vector<FeatureRecord> records;
  LabelVocabulary vocab;
  std::vector<VideoEmotionRecord> videos;
};

SynthCorpus gen_synthetic(const SynthConfig& config, uint64_t seed);

// Emotion label for an ordered gesture-label sequence under a named rule
// ("majority_even" or "contains_any:<id>,<id>,...").
size_t apply_emotion_rule(const std::string& rule, std::span<const size_t> labels);

}  // namespace mgr
