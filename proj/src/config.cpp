#include "mgr/config.hpp"

#include <fstream>
#include <set>

namespace mgr {

using json = nlohmann::json;

namespace {

// Path-tracked typed access; wrong types and unknown keys become config
// errors naming the field.
struct Section {
  const json* j;  // null when the section is absent (defaults apply)
  std::string path;

  void allow_only(std::initializer_list<const char*> keys) const {
    if (!j) return;
    std::set<std::string> allowed;
    for (const char* k : keys) allowed.insert(k);
    for (const auto& [key, value] : j->items())
      if (!allowed.count(key))
        throw ConfigError(path.empty() ? "unknown field '" + key + "'"
                                       : path + "." + key + ": unknown field");
  }

  std::string at(const std::string& key) const {
    return path.empty() ? key : path + "." + key;
  }

  template <typename T>
  void read(const std::string& key, T& out) const {
    if (!j || !j->contains(key)) return;
    try {
      out = (*j).at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(at(key) + ": invalid value");
    }
  }

  Section section(const std::string& key) const {
    if (!j || !j->contains(key)) return Section{nullptr, at(key)};
    const json& sub = (*j).at(key);
    if (!sub.is_object()) throw ConfigError(at(key) + ": expected an object");
    return Section{&sub, at(key)};
  }
};

void read_real(const Section& s, const std::string& key, real& out) {
  double v = double(out);
  s.read(key, v);
  out = real(v);
}

std::vector<std::pair<size_t, size_t>> read_pairs(const Section& s, const std::string& key) {
  std::vector<std::pair<size_t, size_t>> out;
  if (!s.j || !s.j->contains(key)) return out;
  const json& arr = s.j->at(key);
  if (!arr.is_array()) throw ConfigError(s.at(key) + ": expected an array of [a, b] pairs");
  for (const json& p : arr) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() ||
        !p[1].is_number_unsigned())
      throw ConfigError(s.at(key) + ": expected an array of [a, b] pairs");
    out.emplace_back(p[0].get<size_t>(), p[1].get<size_t>());
  }
  return out;
}

json pairs_json(const std::vector<std::pair<size_t, size_t>>& pairs) {
  json arr = json::array();
  for (auto [a, b] : pairs) arr.push_back(json::array({a, b}));
  return arr;
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
  if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  return j;
}

}  // namespace

void RunConfig::validate() const {
  if (tau <= 0) throw ConfigError("model.tau: must be positive");
  if (align_batch < 2) throw ConfigError("align.batch_size: must be >= 2 for alignment");
  std::string tmpl;
  parse_prompt_mode(prompt_mode, &tmpl);  // throws with its own message
  parse_kl_direction(kl_direction);
  parse_modality(emotion_modality);
  if (visual_tokens == 0) throw ConfigError("model.visual_tokens: must be positive");
  if (d == 0 || heads == 0 || d % heads != 0)
    throw ConfigError("model.heads: model.d must be divisible by model.heads");
  if (emotion_dim % emotion_heads != 0)
    throw ConfigError("emotion.heads: emotion.dim must be divisible by emotion.heads");
  if (eval_holdout <= 0 || eval_holdout >= 1)
    throw ConfigError("eval.holdout_ratio: must be in (0, 1)");
  if (emotion_holdout <= 0 || emotion_holdout >= 1)
    throw ConfigError("emotion.holdout_ratio: must be in (0, 1)");
  if (corpus_dir.empty()) throw ConfigError("corpus: path is required");
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  Section root{&j, ""};
  root.allow_only({"seed", "corpus", "out", "model", "align", "mgr", "emotion", "eval", "paths"});
  root.read("seed", cfg.seed);
  root.read("corpus", cfg.corpus_dir);
  root.read("out", cfg.out_dir);

  Section model = root.section("model");
  model.allow_only({"d", "heads", "lambda_init", "visual_tokens", "normalize", "tau",
                    "kl_direction", "prompt_mode"});
  model.read("d", cfg.d);
  model.read("heads", cfg.heads);
  read_real(model, "lambda_init", cfg.lambda_init);
  model.read("visual_tokens", cfg.visual_tokens);
  model.read("normalize", cfg.normalize);
  read_real(model, "tau", cfg.tau);
  model.read("kl_direction", cfg.kl_direction);
  model.read("prompt_mode", cfg.prompt_mode);

  Section align = root.section("align");
  align.allow_only({"lr_visual", "lr_text", "weight_decay", "epochs", "batch_size"});
  read_real(align, "lr_visual", cfg.align_lr_visual);
  read_real(align, "lr_text", cfg.align_lr_text);
  read_real(align, "weight_decay", cfg.align_weight_decay);
  align.read("epochs", cfg.align_epochs);
  align.read("batch_size", cfg.align_batch);

  Section mgr_s = root.section("mgr");
  mgr_s.allow_only({"lr", "weight_decay", "epochs", "batch_size", "hidden"});
  read_real(mgr_s, "lr", cfg.mgr_lr);
  read_real(mgr_s, "weight_decay", cfg.mgr_weight_decay);
  mgr_s.read("epochs", cfg.mgr_epochs);
  mgr_s.read("batch_size", cfg.mgr_batch);
  mgr_s.read("hidden", cfg.mgr_hidden);

  Section emo = root.section("emotion");
  emo.allow_only({"lr", "weight_decay", "epochs", "batch_size", "dim", "depth", "heads",
                  "ffn_mult", "max_len", "classes", "modality", "holdout_ratio"});
  read_real(emo, "lr", cfg.emotion_lr);
  read_real(emo, "weight_decay", cfg.emotion_weight_decay);
  emo.read("epochs", cfg.emotion_epochs);
  emo.read("batch_size", cfg.emotion_batch);
  emo.read("dim", cfg.emotion_dim);
  emo.read("depth", cfg.emotion_depth);
  emo.read("heads", cfg.emotion_heads);
  emo.read("ffn_mult", cfg.emotion_ffn_mult);
  emo.read("max_len", cfg.emotion_max_len);
  emo.read("classes", cfg.emotion_classes);
  emo.read("modality", cfg.emotion_modality);
  emo.read("holdout_ratio", cfg.emotion_holdout);

  Section eval = root.section("eval");
  eval.allow_only({"holdout_ratio", "confusable_pairs"});
  eval.read("holdout_ratio", cfg.eval_holdout);
  cfg.confusable_pairs = read_pairs(eval, "confusable_pairs");

  Section paths = root.section("paths");
  paths.allow_only({"align_checkpoint", "cls_checkpoint", "emotion_checkpoint"});
  paths.read("align_checkpoint", cfg.align_ckpt);
  paths.read("cls_checkpoint", cfg.cls_ckpt);
  paths.read("emotion_checkpoint", cfg.emotion_ckpt);

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(parse_file(path));
}

json run_config_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["corpus"] = cfg.corpus_dir;
  j["out"] = cfg.out_dir;
  j["model"] = {{"d", cfg.d},
                {"heads", cfg.heads},
                {"lambda_init", double(cfg.lambda_init)},
                {"visual_tokens", cfg.visual_tokens},
                {"normalize", cfg.normalize},
                {"tau", double(cfg.tau)},
                {"kl_direction", cfg.kl_direction},
                {"prompt_mode", cfg.prompt_mode}};
  j["align"] = {{"lr_visual", double(cfg.align_lr_visual)},
                {"lr_text", double(cfg.align_lr_text)},
                {"weight_decay", double(cfg.align_weight_decay)},
                {"epochs", cfg.align_epochs},
                {"batch_size", cfg.align_batch}};
  j["mgr"] = {{"lr", double(cfg.mgr_lr)},
              {"weight_decay", double(cfg.mgr_weight_decay)},
              {"epochs", cfg.mgr_epochs},
              {"batch_size", cfg.mgr_batch},
              {"hidden", cfg.mgr_hidden}};
  j["emotion"] = {{"lr", double(cfg.emotion_lr)},
                  {"weight_decay", double(cfg.emotion_weight_decay)},
                  {"epochs", cfg.emotion_epochs},
                  {"batch_size", cfg.emotion_batch},
                  {"dim", cfg.emotion_dim},
                  {"depth", cfg.emotion_depth},
                  {"heads", cfg.emotion_heads},
                  {"ffn_mult", cfg.emotion_ffn_mult},
                  {"max_len", cfg.emotion_max_len},
                  {"classes", cfg.emotion_classes},
                  {"modality", cfg.emotion_modality},
                  {"holdout_ratio", cfg.emotion_holdout}};
  j["eval"] = {{"holdout_ratio", cfg.eval_holdout},
               {"confusable_pairs", pairs_json(cfg.confusable_pairs)}};
  j["paths"] = {{"align_checkpoint", cfg.align_ckpt},
                {"cls_checkpoint", cfg.cls_ckpt},
                {"emotion_checkpoint", cfg.emotion_ckpt}};
  return j;
}

SynthConfig synth_config_from_json(const json& j, uint64_t* seed_out) {
  SynthConfig cfg;
  Section root{&j, "synth"};
  root.allow_only({"seed", "classes", "clips_per_class", "token_dim", "text_dim",
                   "visual_tokens", "cluster_spread", "centroid_radius", "pair_mode_offset",
                   "signal_noise", "token_jitter", "signal_dims", "confusable_pairs",
                   "clips_per_video", "emotion_rule", "emotion_classes", "template_offset"});
  uint64_t seed = 7;
  root.read("seed", seed);
  if (seed_out) *seed_out = seed;
  root.read("classes", cfg.classes);
  root.read("clips_per_class", cfg.clips_per_class);
  root.read("token_dim", cfg.token_dim);
  root.read("text_dim", cfg.text_dim);
  root.read("visual_tokens", cfg.visual_tokens);
  root.read("cluster_spread", cfg.cluster_spread);
  root.read("centroid_radius", cfg.centroid_radius);
  root.read("pair_mode_offset", cfg.pair_mode_offset);
  root.read("signal_noise", cfg.signal_noise);
  root.read("token_jitter", cfg.token_jitter);
  root.read("signal_dims", cfg.signal_dims);
  cfg.confusable_pairs = read_pairs(root, "confusable_pairs");
  root.read("clips_per_video", cfg.clips_per_video);
  root.read("emotion_rule", cfg.emotion_rule);
  root.read("emotion_classes", cfg.emotion_classes);
  root.read("template_offset", cfg.template_offset);
  cfg.validate();
  return cfg;
}

SynthConfig load_synth_config(const std::string& path, uint64_t* seed_out) {
  return synth_config_from_json(parse_file(path), seed_out);
}

json synth_config_json(const SynthConfig& cfg, uint64_t seed) {
  json j;
  j["seed"] = seed;
  j["classes"] = cfg.classes;
  j["clips_per_class"] = cfg.clips_per_class;
  j["token_dim"] = cfg.token_dim;
  j["text_dim"] = cfg.text_dim;
  j["visual_tokens"] = cfg.visual_tokens;
  j["cluster_spread"] = cfg.cluster_spread;
  j["centroid_radius"] = cfg.centroid_radius;
  j["pair_mode_offset"] = cfg.pair_mode_offset;
  j["signal_noise"] = cfg.signal_noise;
  j["token_jitter"] = cfg.token_jitter;
  j["signal_dims"] = cfg.signal_dims;
  j["confusable_pairs"] = pairs_json(cfg.confusable_pairs);
  j["clips_per_video"] = cfg.clips_per_video;
  j["emotion_rule"] = cfg.emotion_rule;
  j["emotion_classes"] = cfg.emotion_classes;
  j["template_offset"] = cfg.template_offset;
  return j;
}

}  // namespace mgr
