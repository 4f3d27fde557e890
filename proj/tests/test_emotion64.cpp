#include <cmath>

#include "doctest.h"
#include "mgr/emotion.hpp"
#include "mgr/metrics.hpp"
#include "support/gradcheck.hpp"
#include "support/testutil.hpp"

using namespace mgr;

namespace {

EmotionModelConfig tiny_model(Modality m = Modality::TextualPrediction) {
  EmotionModelConfig cfg;
  cfg.modality = m;
  cfg.gesture_classes = 5;
  cfg.vec_dim = m == Modality::TextualPrediction ? 0 : 4;
  cfg.dim = 8;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.max_len = 16;
  cfg.emotions = 2;
  return cfg;
}

EmotionSequence textual_seq(std::vector<size_t> ids, size_t label) {
  EmotionSequence seq;
  seq.video_id = "v";
  seq.modality = Modality::TextualPrediction;
  seq.token_ids = std::move(ids);
  seq.emotion_label = label;
  return seq;
}

}  // namespace

TEST_CASE("emotion logits have width E and single-clip videos work") {
  EmotionModel model(tiny_model(), 3);
  Tensor lg = model.logits(textual_seq({3}, 0));
  CHECK(lg.rows() == 1);
  CHECK(lg.cols() == 2);
  Tensor lg2 = model.logits(textual_seq({3, 1, 4, 1}, 1));
  CHECK(lg2.cols() == 2);
}

TEST_CASE("modality mismatch is a contract error") {
  EmotionModel model(tiny_model(Modality::ProbabilityVector), 3);
  CHECK_THROWS_AS(model.logits(textual_seq({1, 2}, 0)), ContractError);
}

TEST_CASE("readout depends only on the class-token row") {
  EmotionModel model(tiny_model(), 5);
  Tensor hidden = model.encode(textual_seq({2, 4, 0}, 1));
  Tensor logits1 = model.readout(hidden);
  Tensor zeroed = Tensor::zeros(hidden.shape());
  auto hv = hidden.values();
  auto zv = zeroed.values_mut();
  size_t d = hidden.cols();
  for (size_t j = 0; j < d; ++j) zv[j] = hv[j];  // keep row 0, zero the rest
  Tensor logits2 = model.readout(zeroed);
  for (size_t j = 0; j < 2; ++j)
    CHECK(double(logits1.at(0, j)) == doctest::Approx(double(logits2.at(0, j))).epsilon(1e-12));
}

TEST_CASE("positional encoding breaks permutation invariance") {
  // without e^pos, permuting tokens of equal-id multisets cannot change the
  // class-token logits (up to float reassociation); with it, it generally does
  EmotionSequence seq = textual_seq({1, 2, 3, 4}, 0);
  EmotionSequence perm = textual_seq({4, 3, 2, 1}, 0);

  EmotionModelConfig no_pos = tiny_model();
  no_pos.positional = false;
  EmotionModel flat(no_pos, 11);
  Tensor a = flat.logits(seq);
  Tensor b = flat.logits(perm);
  CHECK(double(a.at(0, 0)) == doctest::Approx(double(b.at(0, 0))).epsilon(1e-9));
  CHECK(double(a.at(0, 1)) == doctest::Approx(double(b.at(0, 1))).epsilon(1e-9));

  EmotionModel positional(tiny_model(), 11);
  Tensor c = positional.logits(seq);
  Tensor d = positional.logits(perm);
  bool differs = std::fabs(double(c.at(0, 0)) - double(d.at(0, 0))) > 1e-6 ||
                 std::fabs(double(c.at(0, 1)) - double(d.at(0, 1))) > 1e-6;
  CHECK(differs);
}

TEST_CASE("emotion transformer gradcheck through embedding, attention and head") {
  for (Modality m : {Modality::TextualPrediction, Modality::ProbabilityVector}) {
    EmotionModel model(tiny_model(m), 17);
    EmotionSequence seq;
    seq.video_id = "v";
    seq.modality = m;
    seq.emotion_label = 1;
    if (m == Modality::TextualPrediction) {
      seq.token_ids = {0, 3, 3, 2};
    } else {
      Rng rng(4);
      for (int i = 0; i < 4; ++i) {
        std::vector<real> vec(4);
        for (auto& v : vec) v = real(rng.normal());
        seq.token_vecs.push_back(vec);
      }
    }
    auto loss_fn = [&] {
      return cross_entropy_with_logits(model.logits(seq), {seq.emotion_label});
    };
    std::vector<Tensor> leaves;
    for (Parameter* p : model.store().all()) leaves.push_back(p->tensor());
    auto r = gradcheck::check(loss_fn, leaves);
    INFO(modality_str(m) << " max_rel_err=" << r.max_rel_err);
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("sequence truncation keeps the temporal prefix") {
  Corpus corpus;
  VideoEmotionRecord video;
  video.video_id = "long";
  video.emotion_label = 1;
  ClipOutputs outputs;
  for (size_t i = 0; i < 6; ++i) {
    FeatureRecord rec;
    rec.clip_id = "c" + std::to_string(i);
    rec.video_id = "long";
    rec.clip_index = i;
    rec.label_id = i % 3;
    rec.visual = {real(0)};
    corpus.records.push_back(rec);
    video.clip_ids.push_back(rec.clip_id);
    MgrPrediction pred;
    pred.clip_id = rec.clip_id;
    pred.predicted_label = i;  // token i identifies position i
    outputs.predictions[rec.clip_id] = pred;
  }
  EmotionSequence seq = build_sequence(video, corpus, outputs, Modality::TextualPrediction, 4);
  CHECK(seq.token_ids == std::vector<size_t>{0, 1, 2, 3});
}

TEST_CASE("build_sequence orders by clip_index and flags missing outputs") {
  Corpus corpus;
  VideoEmotionRecord video;
  video.video_id = "vid";
  video.emotion_label = 0;
  // insert out of temporal order
  for (size_t i : {size_t(2), size_t(0), size_t(1)}) {
    FeatureRecord rec;
    rec.clip_id = "clip" + std::to_string(i);
    rec.video_id = "vid";
    rec.clip_index = i;
    rec.label_id = 0;
    rec.visual = {real(0)};
    corpus.records.push_back(rec);
    video.clip_ids.push_back(rec.clip_id);
  }
  ClipOutputs outputs;
  for (size_t i = 0; i < 3; ++i) {
    MgrPrediction pred;
    pred.predicted_label = 10 + i;
    outputs.predictions["clip" + std::to_string(i)] = pred;
  }
  EmotionSequence seq = build_sequence(video, corpus, outputs, Modality::TextualPrediction, 8);
  CHECK(seq.token_ids == std::vector<size_t>{10, 11, 12});

  outputs.predictions.erase("clip1");
  try {
    build_sequence(video, corpus, outputs, Modality::TextualPrediction, 8);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("clip1") != std::string::npos);
  }

  VideoEmotionRecord empty;
  empty.video_id = "empty";
  CHECK_THROWS_AS(build_sequence(empty, corpus, outputs, Modality::TextualPrediction, 8),
                  DataError);
}

TEST_CASE("topk accuracy contracts") {
  // 3 samples, C = 6; true label ranks 1st, 3rd and 6th
  std::vector<std::vector<real>> logits = {
    {real(0.9), real(0.1), real(0.2), real(0.3), real(0.0), real(0.1)},  // true 0, rank 1
    {real(0.5), real(0.9), real(0.2), real(0.8), real(0.1), real(0.0)},  // true 0, rank 3
    {real(0.9), real(0.8), real(0.7), real(0.6), real(0.5), real(0.4)},  // true 5, rank 6
  };
  std::vector<size_t> labels{0, 0, 5};
  CHECK(topk_accuracy(logits, labels, 5) == doctest::Approx(66.67).epsilon(0.0002));
  CHECK(topk_accuracy(logits, labels, 1) == doctest::Approx(100.0 / 3).epsilon(1e-6));
  CHECK(topk_accuracy(logits, labels, 6) == doctest::Approx(100.0));
  // nondecreasing in k
  for (size_t k = 1; k < 6; ++k)
    CHECK(topk_accuracy(logits, labels, k) <= topk_accuracy(logits, labels, k + 1));
  CHECK_THROWS_AS(topk_accuracy(logits, labels, 0), ContractError);

  // ties: equal logits rank the lower class id first
  std::vector<std::vector<real>> tied = {{real(0.5), real(0.5)}};
  std::vector<size_t> lab0{0}, lab1{1};
  CHECK(topk_accuracy(tied, lab0, 1) == doctest::Approx(100.0));
  CHECK(topk_accuracy(tied, lab1, 1) == doctest::Approx(0.0));
}

TEST_CASE("confusion matrix counts and normalization") {
  std::vector<size_t> actual{2, 0, 1, 2, 2};
  std::vector<size_t> predicted{0, 0, 1, 2, 2};
  ConfusionMatrix cm = confusion_matrix(actual, predicted, 3);
  CHECK(cm.total() == 5);
  CHECK(cm.at(2, 0) == 1);
  CHECK(cm.at(2, 2) == 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.normalized[2 * 3 + 0] == doctest::Approx(1.0 / 3));

  // perfect predictions give a diagonal matrix
  ConfusionMatrix diag = confusion_matrix(actual, actual, 3);
  for (size_t a = 0; a < 3; ++a)
    for (size_t p = 0; p < 3; ++p)
      if (a != p) CHECK(diag.at(a, p) == 0);

  // single sample at [2, 0]
  std::vector<size_t> one_a{2}, one_p{0};
  ConfusionMatrix single = confusion_matrix(one_a, one_p, 3);
  CHECK(single.at(2, 0) == 1);
  CHECK(single.total() == 1);

  // row sums match a brute-force per-class recount on random data
  Rng rng(8);
  std::vector<size_t> ra(100), rp(100);
  for (size_t i = 0; i < 100; ++i) {
    ra[i] = rng.index(4);
    rp[i] = rng.index(4);
  }
  ConfusionMatrix rcm = confusion_matrix(ra, rp, 4);
  for (size_t c = 0; c < 4; ++c) {
    size_t expected = 0;
    for (size_t v : ra)
      if (v == c) ++expected;
    size_t row_sum = 0;
    for (size_t p = 0; p < 4; ++p) row_sum += rcm.at(c, p);
    CHECK(row_sum == expected);
  }
  CHECK(rcm.total() == 100);
}

TEST_CASE("metric values are invariant under evaluation-set permutation") {
  Rng rng(9);
  size_t n = 40, c = 5;
  std::vector<std::vector<real>> logits(n, std::vector<real>(c));
  std::vector<size_t> labels(n);
  for (size_t i = 0; i < n; ++i) {
    labels[i] = rng.index(c);
    for (auto& v : logits[i]) v = real(rng.normal());
  }
  double base = topk_accuracy(logits, labels, 2);
  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<std::vector<real>> plogits(n);
  std::vector<size_t> plabels(n);
  for (size_t i = 0; i < n; ++i) {
    plogits[i] = logits[perm[i]];
    plabels[i] = labels[perm[i]];
  }
  CHECK(topk_accuracy(plogits, plabels, 2) == doctest::Approx(base));
}
