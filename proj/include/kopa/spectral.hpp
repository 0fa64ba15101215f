#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kopa/error.hpp"
#include "kopa/matrix.hpp"

namespace kopa {

/// Stopping rule for the power iteration: a triplet is accepted once
/// ||X v - sigma u|| <= tol * sigma. `seed` fixes the start vector.
struct IterationControl {
  double tol = 1e-10;
  int max_iter = 5000;
  std::uint64_t seed = 0;

  /// Throws DomainError unless tol > 0 and max_iter >= 1.
  void validate() const;
};

struct SingularTriplet {
  double sigma = 0.0;
  std::vector<double> u;  // unit, first nonzero entry positive
  std::vector<double> v;  // unit
  int iterations = 0;
  /// Zero input (or exhausted rank): sigma is 0 and u, v are arbitrary unit vectors.
  bool degenerate = false;
  /// (sigma_1 - sigma_2) / sigma_1 < 1e-6, measured or estimated, or the gap
  /// was too small to resolve the vector within max_iter sweeps. u, v then
  /// lie in the leading invariant subspace but are not unique.
  bool near_tie = false;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, SingularTriplet best)
      : Error(what), best_(std::move(best)) {}
  const SingularTriplet& best_iterate() const noexcept { return best_; }

 private:
  SingularTriplet best_;
};

/// Relative gap below which two singular values count as tied.
inline constexpr double kNearTieGap = 1e-6;

/// Leading singular triplet by power iteration on the Gram matrix of the
/// smaller side. Throws ConvergenceError (carrying the best iterate) when
/// max_iter sweeps settle neither the residual nor the Rayleigh quotient.
SingularTriplet leading_triplet(const DenseMatrix& x, const IterationControl& ctl = {});

/// Top-k triplets by Hotelling deflation X <- X - sigma u v^T, in
/// nonincreasing sigma order. Requires 1 <= k <= min(rows, cols).
std::vector<SingularTriplet> top_k_triplets(const DenseMatrix& x, std::size_t k,
                                            const IterationControl& ctl = {});

double spectral_norm(const DenseMatrix& x, const IterationControl& ctl = {});

/// All min(rows, cols) singular values, nonincreasing, from a dense
/// bidiagonal SVD. For full spectra (compression curves), where deflation
/// would be too slow.
std::vector<double> singular_values(const DenseMatrix& x);

/// Orthonormal basis (as columns) of the column space of m, by modified
/// Gram-Schmidt with column pivoting. Columns whose residual falls below
/// 1e-10 * ||m||_S are dropped.
DenseMatrix column_space_basis(const DenseMatrix& m);

/// Cosine of the smallest principal angle between the column spaces of m1
/// and m2: the largest singular value of Q1^T Q2. Throws DomainError for a
/// zero matrix and DimensionError when row counts differ.
double principal_angle_cos(const DenseMatrix& m1, const DenseMatrix& m2);

/// Squared bound Lambda^2(mu, nu, theta, eta) on ||M1 + M2||_S^2, where mu,
/// nu are the spectral norms and theta, eta the smallest principal angles
/// between the column spaces and between the row spaces.
double norm_sum_bound(double mu, double nu, double theta, double eta_angle);

}  // namespace kopa
