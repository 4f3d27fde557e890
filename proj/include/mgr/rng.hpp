#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mgr {

// splitmix64 finalizer; used for seed derivation and stream splitting.
uint64_t mix64(uint64_t x);

// FNV-1a over the bytes of a string; combined with mix64 to derive
// per-component seeds from (seed, name).
uint64_t hash_str(const std::string& s);

// Portable deterministic generator (xoshiro256**). std::*_distribution is
// implementation-defined, so uniform/normal are implemented here; identical
// seeds give identical sequences on every platform.
class Rng {
public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();                     // standard normal via Box-Muller
  double normal(double mean, double sd);
  size_t index(size_t n);              // [0, n), n >= 1

  // Independent stream derived from this generator's seed and a tag; does
  // not advance the parent.
  Rng fork(const std::string& tag) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  uint64_t seed_;
  uint64_t s_[4];
};

}  // namespace mgr
