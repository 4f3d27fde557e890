#include "mgr/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "mgr/rng.hpp"

namespace mgr {

using json = nlohmann::json;
namespace fs = std::filesystem;

// LabelVocabulary -------------------------------------------------------------

size_t LabelVocabulary::text_dim() const {
  for (const LabelClass& c : classes)
    for (const auto& [tid, vec] : c.text_by_template) return vec.size();
  return 0;
}

bool LabelVocabulary::has_template(const std::string& template_id) const {
  for (const TemplateSpec& t : templates)
    if (t.id == template_id) return true;
  return false;
}

std::string LabelVocabulary::known_templates() const {
  std::string out;
  for (const TemplateSpec& t : templates) {
    if (!out.empty()) out += ", ";
    out += t.id;
  }
  return out;
}

const std::vector<real>& LabelVocabulary::text(size_t class_id,
                                               const std::string& template_id) const {
  if (class_id >= classes.size())
    throw ContractError("vocabulary: class id " + std::to_string(class_id) +
                        " out of range (C=" + std::to_string(classes.size()) + ")");
  const LabelClass& c = classes[class_id];
  auto it = c.text_by_template.find(template_id);
  if (it == c.text_by_template.end())
    throw ConfigError("unknown template '" + template_id + "'; known templates: " +
                      known_templates());
  return it->second;
}

const FeatureRecord& Corpus::record_by_clip(const std::string& clip_id) const {
  return records[index_of_clip(clip_id)];
}

size_t Corpus::index_of_clip(const std::string& clip_id) const {
  if (clip_index_.empty())
    for (size_t i = 0; i < records.size(); ++i) clip_index_[records[i].clip_id] = i;
  auto it = clip_index_.find(clip_id);
  if (it == clip_index_.end()) throw DataError("unknown clip id '" + clip_id + "'");
  return it->second;
}

// Blob IO ----------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'G', 'R', 'F'};
constexpr uint32_t kBlobVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  buf.push_back(char(v & 0xff));
  buf.push_back(char((v >> 8) & 0xff));
  buf.push_back(char((v >> 16) & 0xff));
  buf.push_back(char((v >> 24) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
         (uint32_t(p[3]) << 24);
}

void put_f32(std::string& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

float get_f32(const unsigned char* p) {
  uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file '" + path + "'");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("short write to '" + path + "'");
}

}  // namespace

std::span<const float> FeatureBlob::row(size_t i) const {
  return std::span<const float>(data.data() + i * dim, dim);
}

void write_feature_blob(const std::string& path, size_t count, size_t dim,
                        std::span<const float> data) {
  if (data.size() != count * dim)
    throw ContractError("write_feature_blob: " + std::to_string(data.size()) +
                        " values for count*dim = " + std::to_string(count * dim));
  std::string buf;
  buf.reserve(16 + data.size() * 4);
  buf.append(kMagic, 4);
  put_u32(buf, kBlobVersion);
  put_u32(buf, uint32_t(count));
  put_u32(buf, uint32_t(dim));
  for (float v : data) put_f32(buf, v);
  write_file_bytes(path, buf);
}

FeatureBlob read_feature_blob(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("'" + path + "' is not a feature blob (bad magic)");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  uint32_t version = get_u32(p + 4);
  if (version != kBlobVersion)
    throw FormatError("'" + path + "' has unsupported blob version " +
                      std::to_string(version));
  FeatureBlob blob;
  blob.count = get_u32(p + 8);
  blob.dim = get_u32(p + 12);
  size_t expected = 16 + blob.count * blob.dim * 4;
  if (bytes.size() != expected)
    throw CorruptionError("'" + path + "' payload truncated or padded: expected " +
                          std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()));
  blob.data.resize(blob.count * blob.dim);
  for (size_t i = 0; i < blob.data.size(); ++i) blob.data[i] = get_f32(p + 16 + i * 4);
  return blob;
}

// Corpus load/save ----------------------------------------------------------------

namespace {

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw FormatError("malformed JSON in " + what);
  return j;
}

std::vector<real> to_reals(std::span<const float> row) {
  std::vector<real> out(row.size());
  for (size_t i = 0; i < row.size(); ++i) out[i] = real(row[i]);
  return out;
}

}  // namespace

Corpus load_corpus(const std::string& dir) {
  fs::path root(dir);
  if (!fs::is_directory(root)) throw DataError("corpus directory '" + dir + "' not found");

  Corpus corpus;
  std::map<std::string, FeatureBlob> blobs;
  auto blob_of = [&](const std::string& rel) -> FeatureBlob& {
    auto it = blobs.find(rel);
    if (it == blobs.end())
      it = blobs.emplace(rel, read_feature_blob((root / rel).string())).first;
    return it->second;
  };

  // manifest
  std::ifstream manifest(root / "manifest.jsonl");
  if (!manifest) throw DataError("missing manifest.jsonl in '" + dir + "'");
  std::string line;
  size_t lineno = 0;
  std::set<std::string> clip_ids;
  std::set<std::pair<std::string, size_t>> positions;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    json row = parse_json(line, "manifest.jsonl line " + std::to_string(lineno));
    FeatureRecord rec;
    rec.clip_id = row.at("clip_id").get<std::string>();
    rec.video_id = row.at("video_id").get<std::string>();
    rec.clip_index = row.at("clip_index").get<size_t>();
    rec.label_id = row.at("label_id").get<size_t>();
    std::string blob_rel = row.at("blob").get<std::string>();
    size_t blob_row = row.at("row").get<size_t>();
    FeatureBlob& blob = blob_of(blob_rel);
    if (blob_row >= blob.count)
      throw DataError("manifest row for clip '" + rec.clip_id + "' references row " +
                      std::to_string(blob_row) + " of '" + blob_rel + "' which has only " +
                      std::to_string(blob.count) + " rows");
    rec.visual = to_reals(blob.row(blob_row));
    if (!clip_ids.insert(rec.clip_id).second)
      throw DataError("duplicate clip id '" + rec.clip_id + "'");
    if (!positions.insert({rec.video_id, rec.clip_index}).second)
      throw DataError("duplicate (video_id, clip_index) = ('" + rec.video_id + "', " +
                      std::to_string(rec.clip_index) + ")");
    if (!corpus.records.empty() && rec.visual.size() != corpus.records[0].visual.size())
      throw DataError("clip '" + rec.clip_id + "' has feature dim " +
                      std::to_string(rec.visual.size()) + ", corpus uses " +
                      std::to_string(corpus.records[0].visual.size()));
    corpus.records.push_back(std::move(rec));
  }
  if (corpus.records.empty()) throw DataError("manifest.jsonl in '" + dir + "' is empty");

  // vocabulary
  std::ifstream vocab_in(root / "vocabulary.json");
  if (!vocab_in) throw DataError("missing vocabulary.json in '" + dir + "'");
  std::string vocab_text((std::istreambuf_iterator<char>(vocab_in)),
                         std::istreambuf_iterator<char>());
  json vj = parse_json(vocab_text, "vocabulary.json");
  for (const json& tj : vj.at("templates")) {
    TemplateSpec t;
    t.id = tj.at("id").get<std::string>();
    t.text = tj.at("template").get<std::string>();
    corpus.vocab.templates.push_back(std::move(t));
  }
  for (const json& cj : vj.at("classes")) {
    LabelClass c;
    c.id = cj.at("id").get<size_t>();
    c.name = cj.at("name").get<std::string>();
    for (const auto& [tid, ref] : cj.at("text_blobs").items()) {
      std::string blob_rel = ref.at("blob").get<std::string>();
      size_t blob_row = ref.at("row").get<size_t>();
      FeatureBlob& blob = blob_of(blob_rel);
      if (blob_row >= blob.count)
        throw DataError("vocabulary class '" + c.name + "' template '" + tid +
                        "' references row " + std::to_string(blob_row) + " of '" + blob_rel +
                        "' which has only " + std::to_string(blob.count) + " rows");
      c.text_by_template[tid] = to_reals(blob.row(blob_row));
    }
    corpus.vocab.classes.push_back(std::move(c));
  }
  for (size_t i = 0; i < corpus.vocab.classes.size(); ++i) {
    if (corpus.vocab.classes[i].id != i)
      throw DataError("vocabulary class ids are not contiguous at position " +
                      std::to_string(i));
    for (const TemplateSpec& t : corpus.vocab.templates)
      if (!corpus.vocab.classes[i].text_by_template.count(t.id))
        throw DataError("class '" + corpus.vocab.classes[i].name +
                        "' is missing text for template '" + t.id + "'");
  }
  size_t d_t = corpus.vocab.text_dim();
  for (const LabelClass& c : corpus.vocab.classes)
    for (const auto& [tid, vec] : c.text_by_template)
      if (vec.size() != d_t)
        throw DataError("class '" + c.name + "' template '" + tid + "' has text dim " +
                        std::to_string(vec.size()) + ", vocabulary uses " + std::to_string(d_t));
  for (const FeatureRecord& rec : corpus.records)
    if (rec.label_id >= corpus.vocab.size())
      throw DataError("clip '" + rec.clip_id + "' has label " + std::to_string(rec.label_id) +
                      " but vocabulary has " + std::to_string(corpus.vocab.size()) + " classes");

  // videos
  std::ifstream videos(root / "videos.jsonl");
  if (!videos) throw DataError("missing videos.jsonl in '" + dir + "'");
  lineno = 0;
  while (std::getline(videos, line)) {
    ++lineno;
    if (line.empty()) continue;
    json row = parse_json(line, "videos.jsonl line " + std::to_string(lineno));
    VideoEmotionRecord v;
    v.video_id = row.at("video_id").get<std::string>();
    v.emotion_label = row.at("emotion_label").get<size_t>();
    for (const json& cid : row.at("clip_ids")) v.clip_ids.push_back(cid.get<std::string>());
    if (v.clip_ids.empty())
      throw DataError("video '" + v.video_id + "' has no clips");
    for (const std::string& cid : v.clip_ids) {
      const FeatureRecord& rec = corpus.record_by_clip(cid);
      if (rec.video_id != v.video_id)
        throw DataError("video '" + v.video_id + "' lists clip '" + cid +
                        "' which belongs to video '" + rec.video_id + "'");
    }
    corpus.videos.push_back(std::move(v));
  }
  return corpus;
}

void save_corpus(const std::string& dir, const std::vector<FeatureRecord>& records,
                 const LabelVocabulary& vocab, const std::vector<VideoEmotionRecord>& videos) {
  fs::path root(dir);
  fs::create_directories(root);

  // features blob, one row per record in order
  size_t d_v = records.empty() ? 0 : records[0].visual.size();
  std::vector<float> fdata;
  fdata.reserve(records.size() * d_v);
  for (const FeatureRecord& r : records)
    for (real v : r.visual) fdata.push_back(float(v));
  write_feature_blob((root / "features.mgrf").string(), records.size(), d_v, fdata);

  // text blob, rows ordered class-major then template order
  size_t d_t = vocab.text_dim();
  std::vector<float> tdata;
  json classes_json = json::array();
  size_t row_idx = 0;
  for (const LabelClass& c : vocab.classes) {
    json text_blobs = json::object();
    for (const TemplateSpec& t : vocab.templates) {
      const auto& vec = c.text_by_template.at(t.id);
      for (real v : vec) tdata.push_back(float(v));
      text_blobs[t.id] = {{"blob", "text.mgrf"}, {"row", row_idx}};
      ++row_idx;
    }
    classes_json.push_back({{"id", c.id}, {"name", c.name}, {"text_blobs", text_blobs}});
  }
  write_feature_blob((root / "text.mgrf").string(), row_idx, d_t, tdata);

  json templates_json = json::array();
  for (const TemplateSpec& t : vocab.templates)
    templates_json.push_back({{"id", t.id}, {"template", t.text}});
  json vocab_json = {{"classes", classes_json}, {"templates", templates_json}};
  std::ofstream vout(root / "vocabulary.json", std::ios::trunc);
  vout << vocab_json.dump(2) << "\n";

  std::ofstream mout(root / "manifest.jsonl", std::ios::trunc);
  for (size_t i = 0; i < records.size(); ++i) {
    const FeatureRecord& r = records[i];
    json row = {{"clip_id", r.clip_id},   {"video_id", r.video_id},
                {"clip_index", r.clip_index}, {"label_id", r.label_id},
                {"blob", "features.mgrf"},    {"row", i}};
    mout << row.dump() << "\n";
  }

  std::ofstream vidout(root / "videos.jsonl", std::ios::trunc);
  for (const VideoEmotionRecord& v : videos) {
    json row = {{"video_id", v.video_id},
                {"clip_ids", v.clip_ids},
                {"emotion_label", v.emotion_label}};
    vidout << row.dump() << "\n";
  }
}

// Batching ----------------------------------------------------------------------

std::vector<std::vector<size_t>> epoch_batches(size_t n, size_t batch_size, uint64_t seed,
                                               size_t epoch, bool shuffle) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) {
    Rng rng = Rng(seed).fork("epoch:" + std::to_string(epoch));
    rng.shuffle(order);
  }
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < n; start += batch_size) {
    size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

IndexSplit split_indices(size_t n, double holdout_ratio, uint64_t seed) {
  if (holdout_ratio < 0.0 || holdout_ratio >= 1.0)
    throw ConfigError("holdout ratio must be in [0, 1)");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).fork("split");
  rng.shuffle(order);
  size_t train_n = size_t(std::llround(double(n) * (1.0 - holdout_ratio)));
  IndexSplit split;
  split.train.assign(order.begin(), order.begin() + train_n);
  split.eval.assign(order.begin() + train_n, order.end());
  return split;
}

}  // namespace mgr
