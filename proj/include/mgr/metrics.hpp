#pragma once

#include <span>
#include <string>
#include <vector>

#include "mgr/common.hpp"

namespace mgr {

// Percentage of samples whose true label is among the k highest logits.
// Logit ties rank the lower class id first.
double topk_accuracy(const std::vector<std::vector<real>>& logits,
                     std::span<const size_t> labels, size_t k);

struct ConfusionMatrix {
  size_t classes = 0;
  std::vector<size_t> counts;      // [actual * classes + predicted]
  std::vector<double> normalized;  // rows sum to 1, or 0 for absent classes

  size_t at(size_t actual, size_t predicted) const { return counts[actual * classes + predicted]; }
  size_t total() const;
};

ConfusionMatrix confusion_matrix(std::span<const size_t> actual,
                                 std::span<const size_t> predicted, size_t classes);

void write_confusion_csv(const ConfusionMatrix& cm, const std::string& path, bool normalized);

}  // namespace mgr
