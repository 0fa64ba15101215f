#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kopa/matrix.hpp"

namespace kopa {

/// Dyadic split of a 2^M x 2^N matrix: A is 2^m x 2^n, B is 2^(M-m) x 2^(N-n).
class Configuration {
 public:
  /// Throws DomainError unless 0 <= m <= M and 0 <= n <= N; DimensionError if
  /// the ambient size exceeds what a DenseMatrix can index.
  Configuration(int m, int n, int M, int N);

  int m() const noexcept { return m_; }
  int n() const noexcept { return n_; }
  int M() const noexcept { return M_; }
  int N() const noexcept { return N_; }
  int m_dagger() const noexcept { return M_ - m_; }
  int n_dagger() const noexcept { return N_ - n_; }

  std::size_t a_rows() const noexcept { return std::size_t{1} << m_; }
  std::size_t a_cols() const noexcept { return std::size_t{1} << n_; }
  std::size_t b_rows() const noexcept { return std::size_t{1} << m_dagger(); }
  std::size_t b_cols() const noexcept { return std::size_t{1} << n_dagger(); }

  /// Shape of the rearranged matrix: 2^(m+n) x 2^(m'+n').
  std::size_t rearranged_rows() const noexcept { return a_rows() * a_cols(); }
  std::size_t rearranged_cols() const noexcept { return b_rows() * b_cols(); }

  /// Parameter count 2^(m+n) + 2^(m'+n').
  std::uint64_t eta() const noexcept {
    return (std::uint64_t{1} << (m_ + n_)) + (std::uint64_t{1} << (m_dagger() + n_dagger()));
  }

  /// (0,0) or (M,N): the fit reproduces the input exactly.
  bool is_corner() const noexcept { return (m_ == 0 && n_ == 0) || (m_ == M_ && n_ == N_); }

  friend bool operator==(const Configuration&, const Configuration&) = default;
  /// Lexicographic in (m, n), then (M, N).
  friend std::strong_ordering operator<=>(const Configuration& a, const Configuration& b) {
    if (auto c = a.m_ <=> b.m_; c != 0) return c;
    if (auto c = a.n_ <=> b.n_; c != 0) return c;
    if (auto c = a.M_ <=> b.M_; c != 0) return c;
    return a.N_ <=> b.N_;
  }

 private:
  int m_, n_, M_, N_;
};

/// Candidate set: {0..M} x {0..N} without the two corners, lexicographic.
struct ConfigLattice {
  int M;
  int N;
  std::vector<Configuration> entries;
};

/// Exponent e with 2^e == value, or nullopt when value is not a power of two.
std::optional<int> dyadic_exponent(std::size_t value) noexcept;

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);

/// Row-stacking vectorization: element i*cols + j is a(i, j).
///
/// Note this is the row-major convention, not the column-stacking one used
/// by most linear algebra texts; vec(A) vec(B)^T == rearrange(kron(A, B))
/// only holds with row stacking.
std::vector<double> vec(const DenseMatrix& a);

/// Inverse of vec. Throws DimensionError if v.size() != p*q.
DenseMatrix unvec(std::span<const double> v, std::size_t p, std::size_t q);

/// Rearrangement R_{m,n}: row i*2^n + j of the result is vec of block (i, j)
/// of C, blocks being 2^(M-m) x 2^(N-n). An entry permutation, so the
/// Frobenius norm is preserved exactly.
DenseMatrix rearrange(const DenseMatrix& c, const Configuration& cfg);

/// Exact inverse of rearrange.
DenseMatrix inverse_rearrange(const DenseMatrix& r, const Configuration& cfg);

/// Throws DomainError("empty configuration lattice") when M == N == 0.
ConfigLattice candidate_configs(int M, int N);

/// Zero-pads on the right and bottom up to the next powers of two.
DenseMatrix pad_to_dyadic(const DenseMatrix& c);

}  // namespace kopa
