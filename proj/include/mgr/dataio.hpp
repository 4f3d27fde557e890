#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mgr/common.hpp"

namespace mgr {

// One micro-gesture clip: identity, raw visual feature vector (possibly the
// concatenation of several visual tokens), gesture label and position within
// its owning video.
struct FeatureRecord {
  std::string clip_id;
  std::string video_id;
  size_t clip_index = 0;
  size_t label_id = 0;
  std::vector<real> visual;
};

struct TemplateSpec {
  std::string id;
  std::string text;  // e.g. "a photo of {label}"
};

struct LabelClass {
  size_t id = 0;
  std::string name;
  std::map<std::string, std::vector<real>> text_by_template;
};

struct LabelVocabulary {
  std::vector<LabelClass> classes;
  std::vector<TemplateSpec> templates;

  size_t size() const { return classes.size(); }
  size_t text_dim() const;
  bool has_template(const std::string& template_id) const;
  // throws ConfigError listing the known templates when template_id is unknown
  const std::vector<real>& text(size_t class_id, const std::string& template_id) const;
  std::string known_templates() const;
};

struct VideoEmotionRecord {
  std::string video_id;
  std::vector<std::string> clip_ids;  // temporal order
  size_t emotion_label = 0;
};

struct Corpus {
  std::vector<FeatureRecord> records;
  LabelVocabulary vocab;
  std::vector<VideoEmotionRecord> videos;

  size_t feature_dim() const { return records.empty() ? 0 : records[0].visual.size(); }
  size_t num_classes() const { return vocab.size(); }
  const FeatureRecord& record_by_clip(const std::string& clip_id) const;
  size_t index_of_clip(const std::string& clip_id) const;

private:
  mutable std::map<std::string, size_t> clip_index_;
};

// Feature blob files: magic "MGRF", u32 version, u32 count, u32 dim, then
// count*dim little-endian f32 values.
struct FeatureBlob {
  size_t count = 0;
  size_t dim = 0;
  std::vector<float> data;
  std::span<const float> row(size_t i) const;
};

void write_feature_blob(const std::string& path, size_t count, size_t dim,
                        std::span<const float> data);
FeatureBlob read_feature_blob(const std::string& path);

// Corpus directory layout: features .mgrf blobs + manifest.jsonl +
// vocabulary.json + videos.jsonl. Loading validates the documented
// invariants (unique ids, shared dims, resolvable references).
Corpus load_corpus(const std::string& dir);
void save_corpus(const std::string& dir, const std::vector<FeatureRecord>& records,
                 const LabelVocabulary& vocab, const std::vector<VideoEmotionRecord>& videos);

// One epoch of batches: a seeded permutation of [0, n) cut into batch_size
// chunks, last short batch kept. The permutation depends only on
// (seed, epoch).
std::vector<std::vector<size_t>> epoch_batches(size_t n, size_t batch_size, uint64_t seed,
                                               size_t epoch, bool shuffle);

// Deterministic index split (shuffled by seed); first part has
// round(n * (1 - holdout_ratio)) elements.
struct IndexSplit {
  std::vector<size_t> train;
  std::vector<size_t> eval;
};
IndexSplit split_indices(size_t n, double holdout_ratio, uint64_t seed);

}  // namespace mgr
