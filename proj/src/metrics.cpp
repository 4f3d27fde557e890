#include "mgr/metrics.hpp"

#include <fstream>
#include <numeric>

namespace mgr {

double topk_accuracy(const std::vector<std::vector<real>>& logits,
                     std::span<const size_t> labels, size_t k) {
  if (k < 1) throw ContractError("topk_accuracy: k must be >= 1");
  if (logits.size() != labels.size())
    throw ContractError("topk_accuracy: " + std::to_string(logits.size()) + " logit rows for " +
                        std::to_string(labels.size()) + " labels");
  if (logits.empty()) throw ContractError("topk_accuracy: empty evaluation set");
  size_t hits = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const auto& row = logits[i];
    size_t y = labels[i];
    if (y >= row.size())
      throw ContractError("topk_accuracy: label " + std::to_string(y) + " out of range");
    // rank of the true class: classes scoring higher, plus equal-scoring
    // classes with a lower id
    size_t rank = 0;
    for (size_t c = 0; c < row.size(); ++c) {
      if (row[c] > row[y] || (row[c] == row[y] && c < y)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return 100.0 * double(hits) / double(logits.size());
}

size_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), size_t(0));
}

ConfusionMatrix confusion_matrix(std::span<const size_t> actual,
                                 std::span<const size_t> predicted, size_t classes) {
  if (actual.size() != predicted.size())
    throw ContractError("confusion_matrix: " + std::to_string(actual.size()) +
                        " actual labels for " + std::to_string(predicted.size()) +
                        " predictions");
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(classes * classes, 0);
  for (size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] >= classes || predicted[i] >= classes)
      throw ContractError("confusion_matrix: label out of range at sample " + std::to_string(i));
    cm.counts[actual[i] * classes + predicted[i]]++;
  }
  cm.normalized.assign(classes * classes, 0.0);
  for (size_t a = 0; a < classes; ++a) {
    size_t row_sum = 0;
    for (size_t p = 0; p < classes; ++p) row_sum += cm.counts[a * classes + p];
    if (row_sum == 0) continue;
    for (size_t p = 0; p < classes; ++p)
      cm.normalized[a * classes + p] = double(cm.counts[a * classes + p]) / double(row_sum);
  }
  return cm;
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::string& path, bool normalized) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  // rows = actual class, columns = predicted class
  out << "actual";
  for (size_t p = 0; p < cm.classes; ++p) out << ",pred_" << p;
  out << "\n";
  for (size_t a = 0; a < cm.classes; ++a) {
    out << a;
    for (size_t p = 0; p < cm.classes; ++p) {
      out << ",";
      if (normalized)
        out << fmt_real(cm.normalized[a * cm.classes + p]);
      else
        out << cm.counts[a * cm.classes + p];
    }
    out << "\n";
  }
}

}  // namespace mgr
