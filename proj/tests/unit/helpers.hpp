#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "kopa/matrix.hpp"
#include "kopa/rng.hpp"

namespace testutil {

inline kopa::DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  kopa::DenseMatrix out(rows, cols);
  kopa::CounterRng rng(seed, 77);
  for (double& x : out.data()) x = rng.gaussian();
  return out;
}

inline kopa::DenseMatrix random_unit(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  kopa::DenseMatrix out = random_matrix(rows, cols, seed);
  out *= 1.0 / out.frobenius_norm();
  return out;
}

// Uniform integer in [lo, hi].
inline int uniform_int(kopa::CounterRng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testutil
