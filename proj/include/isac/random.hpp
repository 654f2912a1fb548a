// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "isac/linalg.hpp"

#include <cstdint>
#include <random>

namespace isac {

/// splitmix64 finalizer; used to derive independent stream seeds from a
/// master seed and a counter so results do not depend on scheduling.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter = 0) {
  return mix_seed(mix_seed(master ^ mix_seed(stream)) + counter);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Circularly-symmetric complex normal with unit variance.
  cd complex_normal() {
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return cd(re, im) * std::sqrt(0.5);
  }

  CMat complex_normal(Eigen::Index rows, Eigen::Index cols) {
    CMat out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = complex_normal();
    return out;
  }

  RVec normal(Eigen::Index n) {
    RVec out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = normal_(engine_);
    return out;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace isac
