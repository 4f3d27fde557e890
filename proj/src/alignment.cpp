#include "mgr/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgr {

Tensor build_gt(std::span<const size_t> labels) {
  size_t n = labels.size();
  if (n < 2)
    throw ContractError("build_gt: batch of " + std::to_string(n) +
                        " is degenerate, need n >= 2");
  Tensor gt = Tensor::zeros({n, n});
  auto v = gt.values_mut();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      v[i * n + j] = labels[i] == labels[j] ? real(1) : real(0);
  return gt;
}

SimilarityScores similarity_scores(const Tensor& v_hat, const Tensor& t_hat, real tau,
                                   bool normalize) {
  if (tau <= 0) throw ConfigError("tau must be positive, got " + fmt_real(double(tau)));
  if (v_hat.ndim() != 2 || t_hat.ndim() != 2 || v_hat.cols() != t_hat.cols())
    throw DimensionError("similarity_scores: incompatible towers " + shape_str(v_hat.shape()) +
                         " vs " + shape_str(t_hat.shape()));
  Tensor v = normalize ? l2_normalize_rows(v_hat) : v_hat;
  Tensor t = normalize ? l2_normalize_rows(t_hat) : t_hat;
  SimilarityScores out;
  out.s_visual = scale(matmul(v, transpose(t)), real(1) / tau);
  out.s_text = transpose(out.s_visual);
  return out;
}

KlDirection parse_kl_direction(const std::string& s) {
  if (s == "target_to_pred") return KlDirection::TargetToPred;
  if (s == "pred_to_target") return KlDirection::PredToTarget;
  throw ConfigError("unknown kl direction '" + s +
                    "' (expected target_to_pred or pred_to_target)");
}

namespace {

Tensor normalize_gt_rows(const Tensor& gt) {
  size_t n = gt.rows(), m = gt.cols();
  Tensor target = Tensor::zeros({n, m});
  auto gv = gt.values();
  auto tv = target.values_mut();
  for (size_t i = 0; i < n; ++i) {
    real sum = 0;
    for (size_t j = 0; j < m; ++j) sum += gv[i * m + j];
    if (sum <= 0)
      throw ContractError("alignment_loss: GT row " + std::to_string(i) + " has no positives");
    for (size_t j = 0; j < m; ++j) tv[i * m + j] = gv[i * m + j] / sum;
  }
  return target;
}

}  // namespace

Tensor alignment_loss(const Tensor& s_visual, const Tensor& s_text, const Tensor& gt,
                      KlDirection direction) {
  if (s_visual.shape() != s_text.shape() || s_visual.shape() != gt.shape())
    throw DimensionError("alignment_loss: shapes disagree: " + shape_str(s_visual.shape()) +
                         ", " + shape_str(s_text.shape()) + ", " + shape_str(gt.shape()));
  Tensor target = normalize_gt_rows(gt);
  Tensor pred_visual = row_softmax(s_visual);
  Tensor pred_text = row_softmax(s_text);
  Tensor kl_visual, kl_text;
  if (direction == KlDirection::TargetToPred) {
    kl_visual = kl_divergence_rows(target, pred_visual);
    kl_text = kl_divergence_rows(target, pred_text);
  } else {
    kl_visual = kl_divergence_rows(pred_visual, target);
    kl_text = kl_divergence_rows(pred_text, target);
  }
  return scale(add(kl_visual, kl_text), real(0.5));
}

// Model bundle --------------------------------------------------------------------

PromptMode parse_prompt_mode(const std::string& s, std::string* template_id) {
  if (s == "none") return PromptMode::None;
  if (s == "adaptive") return PromptMode::Adaptive;
  if (s.rfind("handcrafted:", 0) == 0) {
    if (template_id) *template_id = s.substr(12);
    return PromptMode::Handcrafted;
  }
  throw ConfigError("unknown prompt mode '" + s +
                    "' (expected none, handcrafted:<template> or adaptive)");
}

std::string prompt_mode_str(PromptMode mode, const std::string& template_id) {
  switch (mode) {
    case PromptMode::None: return "none";
    case PromptMode::Adaptive: return "adaptive";
    case PromptMode::Handcrafted: return "handcrafted:" + template_id;
  }
  return "none";
}

AlignModel::AlignModel(AlignModelConfig cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg_.visual_tokens == 0) throw ConfigError("visual_tokens must be positive");
  visual_head_.emplace(store_, "visual.proj",
                       ProjectionConfig{cfg_.visual_token_dim, cfg_.dim, 0}, seed);
  text_head_.emplace(store_, "text.proj", ProjectionConfig{cfg_.text_dim, cfg_.dim, 0}, seed);
  if (cfg_.mode == PromptMode::Adaptive)
    prompting_.emplace(store_, "prompt",
                       PromptingConfig{cfg_.dim, cfg_.heads, cfg_.lambda_init}, seed);
}

AlignModel::VisualProjection AlignModel::project_visual(const Tensor& raw) const {
  size_t raw_dim = cfg_.visual_tokens * cfg_.visual_token_dim;
  if (raw.ndim() != 2 || raw.cols() != raw_dim)
    throw ContractError("project_visual expects (n, " + std::to_string(raw_dim) +
                        ") raw features, got " + shape_str(raw.shape()));
  size_t n = raw.rows();
  Tensor per_token = reshape(raw, {n * cfg_.visual_tokens, cfg_.visual_token_dim});
  VisualProjection out;
  out.tokens = visual_head_->forward(per_token);
  out.pooled = group_mean_rows(out.tokens, cfg_.visual_tokens);
  return out;
}

Tensor AlignModel::project_text(const Tensor& raw_text) const {
  return text_head_->forward(raw_text);
}

Tensor AlignModel::enhance(const Tensor& t_bar, const Tensor& v_tokens) const {
  if (cfg_.mode != PromptMode::Adaptive) return t_bar;
  return prompting_->forward(t_bar, v_tokens, cfg_.visual_tokens);
}

Tensor AlignModel::gather_visual(const Corpus& corpus, std::span<const size_t> idx) {
  size_t d = corpus.feature_dim();
  Tensor out = Tensor::zeros({idx.size(), d});
  auto v = out.values_mut();
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& feat = corpus.records[idx[i]].visual;
    std::copy(feat.begin(), feat.end(), v.begin() + i * d);
  }
  return out;
}

std::vector<Parameter*> AlignModel::text_parameters() {
  std::vector<Parameter*> out = store_.with_prefix("text.");
  for (Parameter* p : store_.with_prefix("prompt.")) out.push_back(p);
  return out;
}

// Training ------------------------------------------------------------------------

AlignResult align_train(AlignModel& model, const Corpus& corpus,
                        std::span<const size_t> train_idx, const AlignTrainConfig& cfg,
                        uint64_t seed) {
  if (cfg.batch_size < 2)
    throw ConfigError("alignment batch_size must be >= 2 (GT is degenerate at n = 1)");
  if (train_idx.size() < 2)
    throw ContractError("align_train: need at least 2 training clips");

  std::vector<Parameter*> visual_group = model.visual_parameters();
  std::vector<Parameter*> text_group = model.text_parameters();
  AdamWConfig visual_opt{cfg.lr_visual, real(0.9), real(0.999), real(1e-8), cfg.weight_decay};
  AdamWConfig text_opt{cfg.lr_text, real(0.9), real(0.999), real(1e-8), cfg.weight_decay};

  const std::string& tmpl = model.config().template_id;
  AlignResult result;
  size_t step = 0;
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0;
    size_t epoch_batches_n = 0;
    for (const auto& batch : epoch_batches(train_idx.size(), cfg.batch_size, seed, epoch, true)) {
      if (batch.size() < 2) continue;  // a trailing singleton cannot form a GT matrix
      std::vector<size_t> record_idx(batch.size());
      std::vector<size_t> labels(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) {
        record_idx[i] = train_idx[batch[i]];
        labels[i] = corpus.records[record_idx[i]].label_id;
      }
      Tensor raw_visual = AlignModel::gather_visual(corpus, record_idx);
      Tensor raw_text = text_matrix_for_labels(corpus.vocab, tmpl, labels);

      auto visual = model.project_visual(raw_visual);
      Tensor t_bar = model.project_text(raw_text);
      Tensor t_hat = model.enhance(t_bar, visual.tokens);
      SimilarityScores sims = similarity_scores(visual.pooled, t_hat, model.config().tau,
                                                model.config().normalize);
      Tensor gt = build_gt(labels);
      Tensor loss = alignment_loss(sims.s_visual, sims.s_text, gt, cfg.kl_direction);

      double loss_value = double(loss.item());
      if (!std::isfinite(loss_value))
        throw TrainError("alignment loss diverged (non-finite) at step " +
                         std::to_string(step) + ", epoch " + std::to_string(epoch));
      backward(loss);
      adamw_step(visual_group, visual_opt);
      adamw_step(text_group, text_opt);
      model.store().zero_grad();

      result.trace.push_back({step, loss_value});
      epoch_loss += loss_value;
      ++epoch_batches_n;
      ++step;
    }
    if (epoch_batches_n == 0) continue;
    double mean_loss = epoch_loss / double(epoch_batches_n);
    if (epoch == 0) result.first_epoch_mean_loss = mean_loss;
    result.last_epoch_mean_loss = mean_loss;
    log_debug("align epoch " + std::to_string(epoch) + " mean loss " + fmt_real(mean_loss));
  }
  return result;
}

// Zero-shot -----------------------------------------------------------------------

std::vector<size_t> rank_desc(std::span<const real> scores) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return order;
}

ZeroShotOutcome zero_shot_eval(AlignModel& model, const Corpus& corpus,
                               std::span<const size_t> clip_idx) {
  NoGradGuard no_grad;
  const AlignModelConfig& cfg = model.config();
  size_t classes = corpus.num_classes();
  size_t tokens = cfg.visual_tokens;

  Tensor class_text_raw = text_matrix(corpus.vocab, cfg.template_id);
  Tensor t_bar_classes = model.project_text(class_text_raw);

  ZeroShotOutcome out;
  out.rankings.reserve(clip_idx.size());
  size_t top1_hits = 0, top5_hits = 0;
  for (size_t idx : clip_idx) {
    Tensor raw = AlignModel::gather_visual(corpus, std::vector<size_t>{idx});
    auto visual = model.project_visual(raw);

    Tensor t_hat = t_bar_classes;
    if (cfg.mode == PromptMode::Adaptive) {
      // replicate this clip's tokens once per class so each class row
      // attends to the query clip's visual context
      Tensor replicated = Tensor::zeros({classes * tokens, cfg.dim});
      auto rv = replicated.values_mut();
      auto tv = visual.tokens.values();
      for (size_t c = 0; c < classes; ++c)
        std::copy(tv.begin(), tv.end(), rv.begin() + c * tv.size());
      t_hat = model.prompting()->forward(t_bar_classes, replicated, tokens);
    }

    Tensor v = cfg.normalize ? l2_normalize_rows(visual.pooled) : visual.pooled;
    Tensor t = cfg.normalize ? l2_normalize_rows(t_hat) : t_hat;
    Tensor scores = scale(matmul(v, transpose(t)), real(1) / cfg.tau);
    std::vector<size_t> ranking = rank_desc(scores.values());

    size_t label = corpus.records[idx].label_id;
    if (!ranking.empty() && ranking[0] == label) ++top1_hits;
    size_t k5 = std::min<size_t>(5, ranking.size());
    for (size_t k = 0; k < k5; ++k)
      if (ranking[k] == label) {
        ++top5_hits;
        break;
      }
    out.rankings.push_back(std::move(ranking));
    out.labels.push_back(label);
  }
  if (!clip_idx.empty()) {
    out.top1 = 100.0 * double(top1_hits) / double(clip_idx.size());
    out.top5 = 100.0 * double(top5_hits) / double(clip_idx.size());
  }
  return out;
}

double ranking_topk(const std::vector<std::vector<size_t>>& rankings,
                    std::span<const size_t> labels, size_t k,
                    const std::set<size_t>* restrict_to) {
  if (k < 1) throw ContractError("ranking_topk: k must be >= 1");
  size_t total = 0, hits = 0;
  for (size_t i = 0; i < rankings.size(); ++i) {
    if (restrict_to && !restrict_to->count(labels[i])) continue;
    ++total;
    size_t upto = std::min(k, rankings[i].size());
    for (size_t j = 0; j < upto; ++j)
      if (rankings[i][j] == labels[i]) {
        ++hits;
        break;
      }
  }
  if (total == 0) throw ContractError("ranking_topk: no clips match the restriction");
  return 100.0 * double(hits) / double(total);
}

double nearest_centroid_accuracy(const Corpus& corpus, std::span<const size_t> train_idx,
                                 std::span<const size_t> eval_idx,
                                 const std::set<size_t>* restrict_to) {
  size_t classes = corpus.num_classes();
  size_t d = corpus.feature_dim();
  std::vector<std::vector<double>> centroids(classes, std::vector<double>(d, 0.0));
  std::vector<size_t> counts(classes, 0);
  for (size_t idx : train_idx) {
    const auto& rec = corpus.records[idx];
    for (size_t j = 0; j < d; ++j) centroids[rec.label_id][j] += double(rec.visual[j]);
    counts[rec.label_id]++;
  }
  for (size_t c = 0; c < classes; ++c)
    if (counts[c] > 0)
      for (size_t j = 0; j < d; ++j) centroids[c][j] /= double(counts[c]);

  size_t total = 0, hits = 0;
  for (size_t idx : eval_idx) {
    const auto& rec = corpus.records[idx];
    if (restrict_to && !restrict_to->count(rec.label_id)) continue;
    ++total;
    size_t best = 0;
    double best_d = 1e300;
    for (size_t c = 0; c < classes; ++c) {
      double dist = 0;
      for (size_t j = 0; j < d; ++j) {
        double diff = double(rec.visual[j]) - centroids[c][j];
        dist += diff * diff;
      }
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    if (best == rec.label_id) ++hits;
  }
  if (total == 0) throw ContractError("nearest_centroid_accuracy: empty evaluation set");
  return 100.0 * double(hits) / double(total);
}

}  // namespace mgr
