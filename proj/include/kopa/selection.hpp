#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kopa/fit.hpp"
#include "kopa/kron.hpp"
#include "kopa/matrix.hpp"
#include "kopa/spectral.hpp"

namespace kopa {

/// Penalty weight of the information criterion. kappa = 0 is MSE, 2 is AIC
/// and (M+N) ln 2 is BIC.
struct Criterion {
  double kappa = 0;
  std::string name = "custom";

  static Criterion mse();
  static Criterion aic();
  static Criterion bic(int M, int N);
  static Criterion custom(double kappa);
  /// "mse", "aic" or "bic" (case-insensitive). Throws DomainError otherwise.
  static Criterion preset(std::string_view name, int M, int N);

  /// Throws DomainError unless kappa is finite and >= 0.
  void validate() const;
};

enum class IcFlag {
  ok,
  perfect_fit,     // rss at round-off level of ||Y||^2, ic is -infinity
  not_converged,   // fit failed; the row is excluded from the argmin
};

std::string_view to_string(IcFlag flag) noexcept;

struct IcRecord {
  Configuration cfg;
  std::uint64_t eta = 0;
  double lambda_hat = 0;
  double rss = 0;  // ||Y - Y_hat||_F^2, clamped at 0
  double ic = 0;
  IcFlag flag = IcFlag::ok;
  bool rss_clamped = false;
  bool near_tie = false;
  std::string message;  // failure reason when flag == not_converged
};

/// ic = 2^(M+N) ln(||Y||_F^2 - lambda_hat^2) + kappa * eta.
/// Corner configurations throw DomainError; a zero Y throws DomainError.
IcRecord information_criterion(const DenseMatrix& y, const Configuration& cfg,
                               const Criterion& crit, const IterationControl& ctl = {});

struct SelectionReport {
  int M = 0;
  int N = 0;
  double kappa = 0;
  std::string criterion;
  std::vector<IcRecord> table;  // lexicographic (m, n)
  Configuration chosen{0, 0, 0, 0};
  /// Other configurations whose ic equals the minimum exactly; chosen is the
  /// lexicographically smallest of the tied set.
  std::vector<Configuration> tied_with;
  std::vector<std::string> warnings;

  const IcRecord& row(int m, int n) const;
  const IcRecord& chosen_row() const { return row(chosen.m(), chosen.n()); }
};

struct ScanOptions {
  /// Worker threads for the scan; 0 picks std::thread::hardware_concurrency.
  unsigned threads = 1;
};

/// Evaluates the criterion on every candidate configuration and returns the
/// full table with its argmin. Rows whose fit throws ConvergenceError are
/// flagged and skipped; if every row fails the first error is rethrown.
SelectionReport select_configuration(const DenseMatrix& y, const Criterion& crit,
                                     const IterationControl& ctl = {}, ScanOptions opts = {});

/// CSV with header m,n,eta,lambda_hat,rss,ic,flag.
std::string report_to_csv(const SelectionReport& report);
std::string report_to_json(const SelectionReport& report);

struct GapReport {
  double phi = 0;
  double psi2 = 0;
  Configuration argmax{0, 0, 0, 0};
  std::vector<std::pair<Configuration, double>> per_config;  // every candidate, lexicographic
};

/// phi = max over wrong candidate configurations of ||R_{m,n}[A (x) B]||_S.
/// A and B must have unit Frobenius norm (to 1e-8) and match true_cfg.
GapReport representation_gap(const DenseMatrix& a, const DenseMatrix& b,
                             const Configuration& true_cfg, const IterationControl& ctl = {});

struct TwoTermDiagnostics {
  double phi1 = 0;
  double phi2 = 0;
  double xi = 0;
  std::optional<Configuration> xi_argmax;
};

/// xi is the largest cosine of the principal angle between the column spaces
/// of R_{m,n}[A1 (x) B1] and R_{m,n}[A2 (x) B2] over wrong configurations with
/// m+n >= m'+n', and between their row spaces over the rest.
TwoTermDiagnostics two_term_diagnostics(const DenseMatrix& a1, const DenseMatrix& b1,
                                        const DenseMatrix& a2, const DenseMatrix& b2,
                                        const Configuration& true_cfg,
                                        const IterationControl& ctl = {});

}  // namespace kopa
