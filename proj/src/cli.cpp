#include "mgr/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "mgr/checkpoint.hpp"
#include "mgr/config.hpp"
#include "mgr/metrics.hpp"

namespace mgr::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Args {
  std::string subcommand;
  std::string config_path;
  std::string out_override;
  bool has_seed = false;
  uint64_t seed = 0;
};

Args parse_args(const std::vector<std::string>& argv) {
  Args args;
  if (argv.empty()) throw ConfigError("missing subcommand");
  args.subcommand = argv[0];
  for (size_t i = 1; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    auto value = [&]() -> const std::string& {
      if (i + 1 >= argv.size()) throw ConfigError("flag '" + a + "' needs a value");
      return argv[++i];
    };
    if (a == "--config") {
      args.config_path = value();
    } else if (a == "--seed") {
      try {
        args.seed = std::stoull(value());
      } catch (const std::exception&) {
        throw ConfigError("--seed: expected an unsigned integer");
      }
      args.has_seed = true;
    } else if (a == "--out") {
      args.out_override = value();
    } else {
      throw ConfigError("unknown flag '" + a + "'");
    }
  }
  if (args.config_path.empty()) throw ConfigError("--config <path> is required");
  return args;
}

// Artifact writers ------------------------------------------------------------

void write_metrics_csv(const fs::path& path,
                       const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "metric,value\n";
  for (const auto& [name, value] : rows) out << name << "," << fmt_real(value) << "\n";
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "step,loss\n";
  for (const TraceRow& row : trace) out << row.step << "," << fmt_real(row.loss) << "\n";
}

void write_resolved_config(const fs::path& dir, const json& j) {
  std::ofstream out(dir / "resolved_config.json", std::ios::trunc);
  if (!out) throw DataError("cannot write resolved config in '" + dir.string() + "'");
  out << j.dump(2) << "\n";
}

// Shared stage plumbing ---------------------------------------------------------

struct Stage {
  RunConfig cfg;
  fs::path out;
  Corpus corpus;
  IndexSplit clip_split;
};

Stage open_stage(const RunConfig& cfg) {
  Stage st;
  st.cfg = cfg;
  st.out = cfg.out_dir;
  fs::create_directories(st.out);
  st.corpus = load_corpus(cfg.corpus_dir);
  st.clip_split = split_indices(st.corpus.records.size(), cfg.eval_holdout, cfg.seed);
  return st;
}

AlignModelConfig model_config(const RunConfig& cfg, const Corpus& corpus,
                              const std::string& prompt_mode) {
  AlignModelConfig mc;
  size_t feature_dim = corpus.feature_dim();
  if (feature_dim % cfg.visual_tokens != 0)
    throw ConfigError("model.visual_tokens: corpus feature dim " + std::to_string(feature_dim) +
                      " is not divisible by " + std::to_string(cfg.visual_tokens));
  mc.visual_token_dim = feature_dim / cfg.visual_tokens;
  mc.visual_tokens = cfg.visual_tokens;
  mc.text_dim = corpus.vocab.text_dim();
  mc.dim = cfg.d;
  mc.heads = cfg.heads;
  mc.lambda_init = cfg.lambda_init;
  mc.normalize = cfg.normalize;
  mc.tau = cfg.tau;
  std::string tmpl = "base";
  mc.mode = parse_prompt_mode(prompt_mode, &tmpl);
  mc.template_id = mc.mode == PromptMode::Handcrafted ? tmpl : "base";
  if (!corpus.vocab.has_template(mc.template_id))
    throw ConfigError("model.prompt_mode: unknown template '" + mc.template_id +
                      "'; known templates: " + corpus.vocab.known_templates());
  return mc;
}

AlignTrainConfig align_train_config(const RunConfig& cfg) {
  AlignTrainConfig atc;
  atc.lr_visual = cfg.align_lr_visual;
  atc.lr_text = cfg.align_lr_text;
  atc.weight_decay = cfg.align_weight_decay;
  atc.epochs = cfg.align_epochs;
  atc.batch_size = cfg.align_batch;
  atc.kl_direction = parse_kl_direction(cfg.kl_direction);
  return atc;
}

// Bare artifact names live inside the run's out dir; names with a directory
// component are used as given, so stages can read inputs from other runs.
fs::path resolve_artifact(const fs::path& out, const std::string& name) {
  if (name.find('/') != std::string::npos) return fs::path(name);
  return out / name;
}

void require_file(const fs::path& p, const std::string& field) {
  if (!fs::is_regular_file(p))
    throw ConfigError(field + ": '" + p.string() + "' does not exist (run the producing "
                      "stage first)");
}

void freeze_aligned(AlignModel& model) {
  for (Parameter* p : model.store().all()) p->set_frozen(true);
}

std::pair<double, double> classifier_topk(AlignModel& model, const MlpClassifier& clf,
                                          const Corpus& corpus, std::span<const size_t> idx) {
  std::vector<MgrPrediction> preds = predict_mgr(model, clf, corpus, idx);
  std::vector<std::vector<real>> logits;
  std::vector<size_t> labels;
  logits.reserve(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    logits.push_back(preds[i].logits);
    labels.push_back(corpus.records[idx[i]].label_id);
  }
  return {topk_accuracy(logits, labels, 1),
          topk_accuracy(logits, labels, std::min<size_t>(5, clf.classes()))};
}

// Builds per-clip outputs for the emotion stage: predictions for every clip
// plus the pooled aligned visual vectors.
ClipOutputs collect_clip_outputs(AlignModel& model, const MlpClassifier& clf,
                                 const Corpus& corpus) {
  NoGradGuard no_grad;
  std::vector<size_t> all(corpus.records.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  ClipOutputs outputs;
  for (MgrPrediction& p : predict_mgr(model, clf, corpus, all))
    outputs.predictions[p.clip_id] = std::move(p);
  Tensor pooled = model.project_visual(AlignModel::gather_visual(corpus, all)).pooled;
  size_t d = pooled.cols();
  for (size_t i = 0; i < all.size(); ++i) {
    auto row = pooled.values().subspan(i * d, d);
    outputs.visual_vecs[corpus.records[i].clip_id] = std::vector<real>(row.begin(), row.end());
  }
  return outputs;
}

struct EmotionData {
  std::vector<EmotionSequence> train;
  std::vector<EmotionSequence> test;
};

EmotionData build_emotion_splits(const Stage& st, const ClipOutputs& outputs,
                                 Modality modality) {
  const Corpus& corpus = st.corpus;
  IndexSplit vsplit = split_indices(corpus.videos.size(), st.cfg.emotion_holdout,
                                    mix64(st.cfg.seed ^ hash_str("videos")));
  EmotionData data;
  for (size_t i : vsplit.train)
    data.train.push_back(build_sequence(corpus.videos[i], corpus, outputs, modality,
                                        st.cfg.emotion_max_len));
  for (size_t i : vsplit.eval)
    data.test.push_back(build_sequence(corpus.videos[i], corpus, outputs, modality,
                                       st.cfg.emotion_max_len));
  return data;
}

EmotionModelConfig emotion_model_config(const RunConfig& cfg, const Corpus& corpus,
                                        Modality modality) {
  EmotionModelConfig mc;
  mc.modality = modality;
  mc.gesture_classes = corpus.num_classes();
  mc.vec_dim = modality == Modality::ProbabilityVector ? corpus.num_classes()
               : modality == Modality::VisualRepresentation ? cfg.d
                                                            : 0;
  mc.dim = cfg.emotion_dim;
  mc.depth = cfg.emotion_depth;
  mc.heads = cfg.emotion_heads;
  mc.ffn_mult = cfg.emotion_ffn_mult;
  mc.max_len = cfg.emotion_max_len;
  mc.emotions = cfg.emotion_classes;
  return mc;
}

EmotionTrainConfig emotion_train_config(const RunConfig& cfg) {
  EmotionTrainConfig etc;
  etc.lr = cfg.emotion_lr;
  etc.weight_decay = cfg.emotion_weight_decay;
  etc.epochs = cfg.emotion_epochs;
  etc.batch_size = cfg.emotion_batch;
  return etc;
}

// Subcommands ---------------------------------------------------------------------

int run_gen_synth(const Args& args) {
  uint64_t seed = 7;
  SynthConfig cfg = load_synth_config(args.config_path, &seed);
  if (args.has_seed) seed = args.seed;
  if (args.out_override.empty())
    throw ConfigError("--out <dir> is required for gen-synth");
  SynthCorpus corpus = gen_synthetic(cfg, seed);
  save_corpus(args.out_override, corpus.records, corpus.vocab, corpus.videos);
  write_resolved_config(args.out_override, synth_config_json(cfg, seed));
  log_info("wrote " + std::to_string(corpus.records.size()) + " clips, " +
           std::to_string(corpus.videos.size()) + " videos to " + args.out_override);
  return 0;
}

int run_align_train(const Stage& st) {
  RunConfig cfg = st.cfg;
  AlignModel model(model_config(cfg, st.corpus, cfg.prompt_mode), cfg.seed);
  AlignResult result = align_train(model, st.corpus, st.clip_split.train,
                                   align_train_config(cfg), cfg.seed);
  save_checkpoint(model.store(), (st.out / cfg.align_ckpt).string());
  write_trace_csv(st.out / "loss_trace.csv", result.trace);
  write_metrics_csv(st.out / "metrics.csv",
                    {{"align_first_epoch_mean_loss", result.first_epoch_mean_loss},
                     {"align_last_epoch_mean_loss", result.last_epoch_mean_loss},
                     {"align_steps", double(result.trace.size())}});
  write_resolved_config(st.out, run_config_json(cfg));
  log_info("alignment finished: mean loss " + fmt_real(result.first_epoch_mean_loss) +
           " -> " + fmt_real(result.last_epoch_mean_loss));
  return 0;
}

int run_zero_shot_eval(const Stage& st) {
  RunConfig cfg = st.cfg;
  fs::path align_path = resolve_artifact(st.out, cfg.align_ckpt);
  require_file(align_path, "paths.align_checkpoint");
  AlignModel model(model_config(cfg, st.corpus, cfg.prompt_mode), cfg.seed);
  load_checkpoint(model.store(), align_path.string());

  ZeroShotOutcome zs = zero_shot_eval(model, st.corpus, st.clip_split.eval);
  std::vector<std::pair<std::string, double>> metrics = {{"zero_shot_top1", zs.top1},
                                                         {"zero_shot_top5", zs.top5}};
  if (!cfg.confusable_pairs.empty()) {
    std::set<size_t> restrict_to;
    for (auto [a, b] : cfg.confusable_pairs) {
      restrict_to.insert(a);
      restrict_to.insert(b);
    }
    double zs_pairs = ranking_topk(zs.rankings, zs.labels, 1, &restrict_to);
    double centroid_pairs = nearest_centroid_accuracy(st.corpus, st.clip_split.train,
                                                      st.clip_split.eval, &restrict_to);
    metrics.emplace_back("zero_shot_top1_confusable", zs_pairs);
    metrics.emplace_back("centroid_top1_confusable", centroid_pairs);
    metrics.emplace_back("confusable_gap", zs_pairs - centroid_pairs);
  }
  metrics.emplace_back("centroid_top1",
                       nearest_centroid_accuracy(st.corpus, st.clip_split.train,
                                                 st.clip_split.eval));
  write_metrics_csv(st.out / "metrics.csv", metrics);
  write_resolved_config(st.out, run_config_json(cfg));
  log_info("zero-shot top-1 " + fmt_real(zs.top1) + "%, top-5 " + fmt_real(zs.top5) + "%");
  return 0;
}

int run_finetune_cls(const Stage& st) {
  RunConfig cfg = st.cfg;
  fs::path align_path = resolve_artifact(st.out, cfg.align_ckpt);
  require_file(align_path, "paths.align_checkpoint");
  AlignModel model(model_config(cfg, st.corpus, cfg.prompt_mode), cfg.seed);
  load_checkpoint(model.store(), align_path.string());
  freeze_aligned(model);
  MlpClassifier clf(model.store(), "mlp", cfg.d, cfg.mgr_hidden, st.corpus.num_classes(),
                    cfg.seed);

  FinetuneConfig ftc{cfg.mgr_lr, cfg.mgr_weight_decay, cfg.mgr_epochs, cfg.mgr_batch};
  FinetuneResult result = finetune_classifier(model, clf, st.corpus, st.clip_split.train,
                                              ftc, cfg.seed);
  save_checkpoint(model.store(), (st.out / cfg.cls_ckpt).string());
  write_trace_csv(st.out / "loss_trace.csv", result.trace);
  auto [train_top1, train_top5] = classifier_topk(model, clf, st.corpus, st.clip_split.train);
  auto [eval_top1, eval_top5] = classifier_topk(model, clf, st.corpus, st.clip_split.eval);
  write_metrics_csv(st.out / "metrics.csv", {{"mgr_train_top1", train_top1},
                                             {"mgr_train_top5", train_top5},
                                             {"mgr_eval_top1", eval_top1},
                                             {"mgr_eval_top5", eval_top5}});
  write_resolved_config(st.out, run_config_json(cfg));
  log_info("classifier eval top-1 " + fmt_real(eval_top1) + "%, top-5 " +
           fmt_real(eval_top5) + "%");
  return 0;
}

// Rebuilds the stage-2 bundle from its checkpoint.
struct LoadedClassifier {
  AlignModel model;
  MlpClassifier clf;
};

LoadedClassifier load_classifier(const Stage& st) {
  RunConfig cfg = st.cfg;
  fs::path cls_path = resolve_artifact(st.out, cfg.cls_ckpt);
  require_file(cls_path, "paths.cls_checkpoint");
  AlignModel model(model_config(cfg, st.corpus, cfg.prompt_mode), cfg.seed);
  MlpClassifier clf(model.store(), "mlp", cfg.d, cfg.mgr_hidden, st.corpus.num_classes(),
                    cfg.seed);
  load_checkpoint(model.store(), cls_path.string());
  return {std::move(model), std::move(clf)};
}

int run_eval_mgr(const Stage& st) {
  RunConfig cfg = st.cfg;
  LoadedClassifier lc = load_classifier(st);

  std::vector<size_t> all(st.corpus.records.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  write_predictions_jsonl(predict_mgr(lc.model, lc.clf, st.corpus, all),
                          (st.out / "predictions.jsonl").string());

  std::vector<MgrPrediction> eval_preds =
    predict_mgr(lc.model, lc.clf, st.corpus, st.clip_split.eval);
  std::vector<std::vector<real>> logits;
  std::vector<size_t> labels, predicted;
  for (size_t i = 0; i < eval_preds.size(); ++i) {
    logits.push_back(eval_preds[i].logits);
    labels.push_back(st.corpus.records[st.clip_split.eval[i]].label_id);
    predicted.push_back(eval_preds[i].predicted_label);
  }
  size_t classes = st.corpus.num_classes();
  ConfusionMatrix cm = confusion_matrix(labels, predicted, classes);
  write_confusion_csv(cm, (st.out / "confusion.csv").string(), false);
  write_confusion_csv(cm, (st.out / "confusion_normalized.csv").string(), true);
  auto [train_top1, train_top5] = classifier_topk(lc.model, lc.clf, st.corpus,
                                                  st.clip_split.train);
  write_metrics_csv(st.out / "metrics.csv",
                    {{"mgr_eval_top1", topk_accuracy(logits, labels, 1)},
                     {"mgr_eval_top5", topk_accuracy(logits, labels,
                                                     std::min<size_t>(5, classes))},
                     {"mgr_train_top1", train_top1},
                     {"mgr_train_top5", train_top5},
                     {"mgr_eval_clips", double(labels.size())}});
  write_resolved_config(st.out, run_config_json(cfg));
  return 0;
}

int run_train_emotion(const Stage& st) {
  RunConfig cfg = st.cfg;
  LoadedClassifier lc = load_classifier(st);
  ClipOutputs outputs = collect_clip_outputs(lc.model, lc.clf, st.corpus);
  Modality modality = parse_modality(cfg.emotion_modality);
  EmotionData data = build_emotion_splits(st, outputs, modality);

  EmotionModel model(emotion_model_config(cfg, st.corpus, modality), cfg.seed);
  EmotionResult result = emotion_train(model, data.train, data.test,
                                       emotion_train_config(cfg), cfg.seed);
  save_checkpoint(model.store(), (st.out / cfg.emotion_ckpt).string());
  write_trace_csv(st.out / "loss_trace.csv", result.trace);
  write_metrics_csv(st.out / "metrics.csv",
                    {{"emotion_train_top1", result.train_top1},
                     {"emotion_test_top1", result.test_top1},
                     {"emotion_train_videos", double(data.train.size())},
                     {"emotion_test_videos", double(data.test.size())}});
  write_resolved_config(st.out, run_config_json(cfg));
  log_info("emotion (" + cfg.emotion_modality + ") test top-1 " +
           fmt_real(result.test_top1) + "%");
  return 0;
}

int run_eval_emotion(const Stage& st) {
  RunConfig cfg = st.cfg;
  LoadedClassifier lc = load_classifier(st);
  fs::path emotion_path = resolve_artifact(st.out, cfg.emotion_ckpt);
  require_file(emotion_path, "paths.emotion_checkpoint");
  ClipOutputs outputs = collect_clip_outputs(lc.model, lc.clf, st.corpus);
  Modality modality = parse_modality(cfg.emotion_modality);
  EmotionData data = build_emotion_splits(st, outputs, modality);

  EmotionModel model(emotion_model_config(cfg, st.corpus, modality), cfg.seed);
  load_checkpoint(model.store(), emotion_path.string());
  write_metrics_csv(st.out / "metrics.csv",
                    {{"emotion_test_top1", emotion_accuracy(model, data.test)},
                     {"emotion_train_top1", emotion_accuracy(model, data.train)}});
  write_resolved_config(st.out, run_config_json(cfg));
  return 0;
}

int run_ablate(const Stage& st) {
  RunConfig cfg = st.cfg;
  struct Row {
    std::string name;
    double top1;
    double top5;
  };
  std::vector<Row> rows;

  auto zero_shot_row = [&](const std::string& name, const std::string& mode) {
    AlignModel model(model_config(cfg, st.corpus, mode), cfg.seed);
    align_train(model, st.corpus, st.clip_split.train, align_train_config(cfg), cfg.seed);
    ZeroShotOutcome zs = zero_shot_eval(model, st.corpus, st.clip_split.eval);
    rows.push_back({name, zs.top1, zs.top5});
    log_info("ablation row '" + name + "': top-1 " + fmt_real(zs.top1) + "%");
  };

  // 1. baseline: classifier on the frozen, randomly initialized projection
  //    (the end-to-end backbone baseline lives outside the feature interface)
  {
    AlignModel model(model_config(cfg, st.corpus, "none"), cfg.seed);
    freeze_aligned(model);
    MlpClassifier clf(model.store(), "mlp", cfg.d, cfg.mgr_hidden, st.corpus.num_classes(),
                      cfg.seed);
    FinetuneConfig ftc{cfg.mgr_lr, cfg.mgr_weight_decay, cfg.mgr_epochs, cfg.mgr_batch};
    finetune_classifier(model, clf, st.corpus, st.clip_split.train, ftc, cfg.seed);
    auto [top1, top5] = classifier_topk(model, clf, st.corpus, st.clip_split.eval);
    rows.push_back({"baseline", top1, top5});
    log_info("ablation row 'baseline': top-1 " + fmt_real(top1) + "%");
  }

  // 2-4. alignment with increasingly rich prompting, scored by zero-shot
  //      retrieval (pre-finetune)
  zero_shot_row("contrastive", "none");
  std::string tmpl = "photo";
  if (cfg.prompt_mode.rfind("handcrafted:", 0) == 0) tmpl = cfg.prompt_mode.substr(12);
  zero_shot_row("handcrafted_prompting", "handcrafted:" + tmpl);

  // 5. finetune on top of the adaptive-prompting alignment
  {
    AlignModel model(model_config(cfg, st.corpus, "adaptive"), cfg.seed);
    align_train(model, st.corpus, st.clip_split.train, align_train_config(cfg), cfg.seed);
    ZeroShotOutcome zs = zero_shot_eval(model, st.corpus, st.clip_split.eval);
    rows.push_back({"adaptive_prompting", zs.top1, zs.top5});
    log_info("ablation row 'adaptive_prompting': top-1 " + fmt_real(zs.top1) + "%");

    freeze_aligned(model);
    MlpClassifier clf(model.store(), "mlp", cfg.d, cfg.mgr_hidden, st.corpus.num_classes(),
                      cfg.seed);
    FinetuneConfig ftc{cfg.mgr_lr, cfg.mgr_weight_decay, cfg.mgr_epochs, cfg.mgr_batch};
    finetune_classifier(model, clf, st.corpus, st.clip_split.train, ftc, cfg.seed);
    auto [top1, top5] = classifier_topk(model, clf, st.corpus, st.clip_split.eval);
    rows.push_back({"finetune", top1, top5});
    log_info("ablation row 'finetune': top-1 " + fmt_real(top1) + "%");
  }

  std::ofstream out(st.out / "ablation.csv", std::ios::trunc);
  if (!out) throw DataError("cannot write ablation report");
  out << "row,top1,top5\n";
  for (const Row& r : rows) out << r.name << "," << fmt_real(r.top1) << ","
                                << fmt_real(r.top5) << "\n";
  write_resolved_config(st.out, run_config_json(cfg));
  return 0;
}

int run_modality_compare(const Stage& st) {
  RunConfig cfg = st.cfg;
  LoadedClassifier lc = load_classifier(st);
  ClipOutputs outputs = collect_clip_outputs(lc.model, lc.clf, st.corpus);

  std::ofstream out(st.out / "modality.csv", std::ios::trunc);
  if (!out) throw DataError("cannot write modality report");
  out << "modality,top1\n";
  // identical budgets and seeds across the three runs; only the input
  // modality varies
  for (Modality modality : {Modality::VisualRepresentation, Modality::ProbabilityVector,
                            Modality::TextualPrediction}) {
    EmotionData data = build_emotion_splits(st, outputs, modality);
    EmotionModel model(emotion_model_config(cfg, st.corpus, modality), cfg.seed);
    EmotionResult result = emotion_train(model, data.train, data.test,
                                         emotion_train_config(cfg), cfg.seed);
    out << modality_str(modality) << "," << fmt_real(result.test_top1) << "\n";
    log_info("modality '" + modality_str(modality) + "': test top-1 " +
             fmt_real(result.test_top1) + "%");
  }
  write_resolved_config(st.out, run_config_json(cfg));
  return 0;
}

void print_usage() {
  std::fprintf(stderr,
               "usage: mgr <subcommand> --config <path> [--seed <u64>] [--out <dir>]\n"
               "subcommands:\n"
               "  gen-synth         generate a synthetic corpus (--out <dir> required)\n"
               "  align-train       stage 1: visual-text contrastive alignment\n"
               "  zero-shot-eval    rank classes by similarity with the aligned towers\n"
               "  finetune-cls      stage 2: train the MLP classifier on the frozen pathway\n"
               "  eval-mgr          clip-level metrics, predictions, confusion matrices\n"
               "  train-emotion     stage 3: train the emotion transformer\n"
               "  eval-emotion      video-level emotion accuracy\n"
               "  ablate            five-row ablation report\n"
               "  modality-compare  emotion models on all three MGR output modalities\n"
               "environment: MGR_LOG in {error, info, debug}\n");
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  static const std::set<std::string> known = {
    "gen-synth",    "align-train",  "zero-shot-eval", "finetune-cls",     "eval-mgr",
    "train-emotion", "eval-emotion", "ablate",        "modality-compare"};
  try {
    if (args.empty() || !known.count(args[0])) {
      print_usage();
      return 2;
    }
    Args parsed = parse_args(args);
    if (parsed.subcommand == "gen-synth") return run_gen_synth(parsed);

    RunConfig cfg = load_run_config(parsed.config_path);
    if (parsed.has_seed) cfg.seed = parsed.seed;
    if (!parsed.out_override.empty()) cfg.out_dir = parsed.out_override;
    Stage st = open_stage(cfg);

    if (parsed.subcommand == "align-train") return run_align_train(st);
    if (parsed.subcommand == "zero-shot-eval") return run_zero_shot_eval(st);
    if (parsed.subcommand == "finetune-cls") return run_finetune_cls(st);
    if (parsed.subcommand == "eval-mgr") return run_eval_mgr(st);
    if (parsed.subcommand == "train-emotion") return run_train_emotion(st);
    if (parsed.subcommand == "eval-emotion") return run_eval_emotion(st);
    if (parsed.subcommand == "ablate") return run_ablate(st);
    if (parsed.subcommand == "modality-compare") return run_modality_compare(st);
    print_usage();
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
}

}  // namespace mgr::cli
