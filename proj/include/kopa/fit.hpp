#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kopa/kron.hpp"
#include "kopa/matrix.hpp"
#include "kopa/spectral.hpp"

namespace kopa {

/// One term lambda * A (x) B with ||A||_F = ||B||_F = 1 and the first
/// nonzero entry of vec(A) positive.
struct KroneckerTerm {
  double lambda;
  DenseMatrix a;
  DenseMatrix b;
};

struct KopaModel {
  Configuration cfg;
  std::vector<KroneckerTerm> terms;  // lambda nonincreasing
  double sigma2_hat = 0;             // ||Y||_F^2 - sum lambda_k^2
  double y_frob2 = 0;                // ||Y||_F^2 of the fitted data
  bool sigma2_clamped = false;       // sigma2_hat rounded below zero and was set to 0
  bool near_tie = false;             // some lambda_k, lambda_{k+1} closer than 1e-6 relative
};

/// Nearest Kronecker product at `cfg` from the leading triplet of the
/// rearranged Y. Throws DimensionError on shape mismatch and DomainError for
/// a zero Y.
KopaModel fit_one_term(const DenseMatrix& y, const Configuration& cfg,
                       const IterationControl& ctl = {});

/// K leading terms of the Kronecker product decomposition at `cfg`.
/// Requires 1 <= K <= min(2^(m+n), 2^(m'+n')).
KopaModel fit_k_terms(const DenseMatrix& y, const Configuration& cfg, std::size_t k,
                      const IterationControl& ctl = {});

/// sum_k lambda_k kron(A_k, B_k); the zero matrix for an empty term list.
DenseMatrix reconstruct(const KopaModel& model);

/// sum_k lambda_k^2 / ||Y||_F^2.
double variance_explained(const KopaModel& model);

/// Largest |tr(A_k A_l^T) - delta_kl| over the A and B factors.
double orthonormality_defect(const KopaModel& model);

/// JSON record {M, N, m, n, K, lambda, vec(A), vec(B), sigma2_hat}.
std::string model_to_json(const KopaModel& model);
KopaModel model_from_json(const std::string& text);

}  // namespace kopa
