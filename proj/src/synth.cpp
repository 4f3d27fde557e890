#include "mgr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "mgr/rng.hpp"

namespace mgr {

namespace {

std::vector<size_t> parse_id_list(const std::string& csv) {
  std::vector<size_t> ids;
  size_t pos = 0;
  while (pos < csv.size()) {
    size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    ids.push_back(std::stoul(csv.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return ids;
}

// Gram-Schmidt a fresh gaussian direction against `basis` (within the first
// `dims` coordinates), returning a unit vector; extends `basis`.
std::vector<double> orthogonal_direction(std::vector<std::vector<double>>& basis, size_t dims,
                                         Rng& rng) {
  std::vector<double> v(dims);
  for (;;) {
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double dot = 0;
      for (size_t i = 0; i < dims; ++i) dot += v[i] * b[i];
      for (size_t i = 0; i < dims; ++i) v[i] -= dot * b[i];
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 1e-6) {
      for (double& x : v) x /= norm;
      break;
    }
  }
  if (basis.size() < dims) basis.push_back(v);
  return v;
}

std::string zero_pad(const char* prefix, size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (classes < 2) throw ConfigError("synth.classes must be >= 2");
  if (confusable_pairs.empty())
    throw ConfigError("synth.confusable_pairs must declare at least one pair");
  std::set<size_t> seen;
  for (auto [a, b] : confusable_pairs) {
    if (a >= classes || b >= classes || a == b)
      throw ConfigError("synth.confusable_pairs entry (" + std::to_string(a) + ", " +
                        std::to_string(b) + ") is invalid for " + std::to_string(classes) +
                        " classes");
    if (!seen.insert(a).second || !seen.insert(b).second)
      throw ConfigError("synth.confusable_pairs: class " + std::to_string(std::max(a, b)) +
                        " appears in more than one pair");
  }
  if (signal_dims < 2 * confusable_pairs.size())
    throw ConfigError("synth.signal_dims must be >= 2 * number of confusable pairs");
  if (signal_dims >= token_dim)
    throw ConfigError("synth.signal_dims must be < synth.token_dim");
  if (clips_per_class == 0) throw ConfigError("synth.clips_per_class must be positive");
  if (visual_tokens == 0) throw ConfigError("synth.visual_tokens must be positive");
  if (clips_per_video == 0) throw ConfigError("synth.clips_per_video must be positive");
  if (cluster_spread <= 0) throw ConfigError("synth.cluster_spread must be positive");
  if (emotion_classes != 2)
    throw ConfigError("synth.emotion_classes: built-in rules are binary (got " +
                      std::to_string(emotion_classes) + ")");
  apply_emotion_rule(emotion_rule, std::vector<size_t>{0});  // validates the rule name
}

size_t apply_emotion_rule(const std::string& rule, std::span<const size_t> labels) {
  if (rule == "majority_even") {
    size_t even = 0;
    for (size_t l : labels)
      if (l % 2 == 0) ++even;
    return even * 2 > labels.size() ? 1 : 0;
  }
  if (rule.rfind("contains_any:", 0) == 0) {
    std::vector<size_t> ids = parse_id_list(rule.substr(13));
    if (ids.empty()) throw ConfigError("emotion rule '" + rule + "' lists no class ids");
    for (size_t l : labels)
      if (std::find(ids.begin(), ids.end(), l) != ids.end()) return 1;
    return 0;
  }
  throw ConfigError("unknown emotion rule '" + rule + "'");
}

SynthCorpus gen_synthetic(const SynthConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng root(mix64(seed ^ hash_str("synth")));

  size_t nuisance = cfg.token_dim - cfg.signal_dims;

  // Which classes belong to a pair, and the shared centroid owner per class.
  std::vector<bool> in_pair(cfg.classes, false);
  std::vector<size_t> centroid_owner(cfg.classes);
  for (size_t c = 0; c < cfg.classes; ++c) centroid_owner[c] = c;
  for (auto [a, b] : cfg.confusable_pairs) {
    in_pair[a] = in_pair[b] = true;
    centroid_owner[b] = a;
  }

  // Centroids live in the nuisance subspace; owners get mutually orthogonal
  // directions so non-confusable classes stay far apart.
  Rng crng = root.fork("centroids");
  std::vector<std::vector<double>> centroid_basis;
  std::vector<std::vector<double>> centroids(cfg.classes, std::vector<double>(cfg.token_dim, 0.0));
  for (size_t c = 0; c < cfg.classes; ++c) {
    if (centroid_owner[c] != c) continue;
    std::vector<double> dir = orthogonal_direction(centroid_basis, nuisance, crng);
    for (size_t j = 0; j < nuisance; ++j)
      centroids[c][cfg.signal_dims + j] = cfg.centroid_radius * dir[j];
  }
  for (size_t c = 0; c < cfg.classes; ++c)
    if (centroid_owner[c] != c) centroids[c] = centroids[centroid_owner[c]];

  // Sub-cluster axes in the signal subspace, orthogonal across pair members.
  Rng arng = root.fork("axes");
  std::vector<std::vector<double>> axis_basis;
  std::vector<std::vector<double>> mode_axis(cfg.classes);
  for (auto [a, b] : cfg.confusable_pairs) {
    mode_axis[a] = orthogonal_direction(axis_basis, cfg.signal_dims, arng);
    mode_axis[b] = orthogonal_direction(axis_basis, cfg.signal_dims, arng);
  }

  SynthCorpus out;
  Rng clip_rng = root.fork("clips");
  size_t clip_counter = 0;
  for (size_t c = 0; c < cfg.classes; ++c) {
    for (size_t k = 0; k < cfg.clips_per_class; ++k) {
      std::vector<double> x(centroids[c]);
      if (in_pair[c]) {
        double sign = clip_rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (size_t j = 0; j < cfg.signal_dims; ++j)
          x[j] += sign * cfg.pair_mode_offset * mode_axis[c][j];
      }
      for (size_t j = 0; j < cfg.token_dim; ++j) {
        double sd = cfg.cluster_spread * (j < cfg.signal_dims ? cfg.signal_noise : 1.0);
        x[j] += clip_rng.normal(0.0, sd);
      }
      FeatureRecord rec;
      rec.clip_id = zero_pad("clip_", clip_counter++, 5);
      rec.label_id = c;
      rec.visual.reserve(cfg.visual_tokens * cfg.token_dim);
      for (size_t t = 0; t < cfg.visual_tokens; ++t)
        for (size_t j = 0; j < cfg.token_dim; ++j)
          rec.visual.push_back(real(x[j] + clip_rng.normal(0.0, cfg.token_jitter)));
      out.records.push_back(std::move(rec));
    }
  }

  // Text vectors: orthogonally-biased base per class, plus a small
  // deterministic per-template offset.
  out.vocab.templates = {{"base", "{label}"},
                         {"photo", "a photo of {label}"},
                         {"video", "a video of {label}"},
                         {"action", "an action of {label}"}};
  Rng trng = root.fork("text");
  std::vector<std::vector<double>> text_basis;
  for (size_t c = 0; c < cfg.classes; ++c) {
    LabelClass cls;
    cls.id = c;
    cls.name = zero_pad("gesture_", c, 2);
    std::vector<double> base = orthogonal_direction(text_basis, cfg.text_dim, trng);
    for (const TemplateSpec& t : out.vocab.templates) {
      std::vector<real> vec(cfg.text_dim);
      if (t.id == "base") {
        for (size_t j = 0; j < cfg.text_dim; ++j) vec[j] = real(base[j]);
      } else {
        Rng org = root.fork("template:" + t.id + ":" + std::to_string(c));
        for (size_t j = 0; j < cfg.text_dim; ++j)
          vec[j] = real(base[j] + cfg.template_offset * org.normal());
      }
      cls.text_by_template[t.id] = std::move(vec);
    }
    out.vocab.classes.push_back(std::move(cls));
  }

  // Group shuffled clips into videos; emotion labels follow the declared rule
  // over the true gesture sequence.
  Rng vrng = root.fork("videos");
  std::vector<size_t> order(out.records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  vrng.shuffle(order);
  size_t video_counter = 0;
  for (size_t start = 0; start < order.size(); start += cfg.clips_per_video) {
    size_t end = std::min(order.size(), start + cfg.clips_per_video);
    VideoEmotionRecord video;
    video.video_id = zero_pad("video_", video_counter++, 4);
    std::vector<size_t> labels;
    for (size_t pos = start; pos < end; ++pos) {
      FeatureRecord& rec = out.records[order[pos]];
      rec.video_id = video.video_id;
      rec.clip_index = pos - start;
      video.clip_ids.push_back(rec.clip_id);
      labels.push_back(rec.label_id);
    }
    video.emotion_label = apply_emotion_rule(cfg.emotion_rule, labels);
    out.videos.push_back(std::move(video));
  }
  return out;
}

}  // namespace mgr
