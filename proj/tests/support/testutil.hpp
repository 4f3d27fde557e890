#pragma once

#include <cmath>
#include <vector>

#include "mgr/rng.hpp"
#include "mgr/tensor.hpp"

namespace testutil {

inline mgr::Tensor random_tensor(mgr::Shape shape, mgr::Rng& rng, double sd = 1.0) {
  mgr::Tensor t = mgr::Tensor::zeros(std::move(shape));
  for (mgr::real& v : t.values_mut()) v = mgr::real(rng.normal(0.0, sd));
  return t;
}

// rows are strictly positive distributions summing to 1
inline mgr::Tensor random_row_distributions(size_t r, size_t c, mgr::Rng& rng) {
  mgr::Tensor t = mgr::Tensor::zeros({r, c});
  auto v = t.values_mut();
  for (size_t i = 0; i < r; ++i) {
    double sum = 0;
    for (size_t j = 0; j < c; ++j) {
      double e = std::exp(rng.normal(0.0, 1.0));
      v[i * c + j] = mgr::real(e);
      sum += e;
    }
    for (size_t j = 0; j < c; ++j) v[i * c + j] = mgr::real(double(v[i * c + j]) / sum);
  }
  return t;
}

inline double max_abs_diff(const mgr::Tensor& a, const mgr::Tensor& b) {
  auto av = a.values();
  auto bv = b.values();
  double m = 0;
  for (size_t i = 0; i < av.size(); ++i)
    m = std::max(m, std::fabs(double(av[i]) - double(bv[i])));
  return m;
}

}  // namespace testutil
