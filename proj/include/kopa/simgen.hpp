#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kopa/fit.hpp"
#include "kopa/kron.hpp"
#include "kopa/matrix.hpp"
#include "kopa/selection.hpp"
#include "kopa/spectral.hpp"

namespace kopa {

/// Y = signal + sigma / 2^((M+N)/2) * E with E iid standard normal.
struct GeneratedInstance {
  DenseMatrix y;
  KopaModel truth;  // noiseless signal terms; sigma2_hat holds sigma^2
  double sigma = 0;
  std::uint64_t seed = 0;
};

/// RNG stream ids used by the generators, so that other code can reproduce
/// individual draws.
namespace streams {
inline constexpr std::uint64_t noise = 1;
inline constexpr std::uint64_t factor_a = 2;
inline constexpr std::uint64_t factor_b = 3;
inline constexpr std::uint64_t factor_a2 = 4;
inline constexpr std::uint64_t factor_b2 = 5;
inline constexpr std::uint64_t gap_d = 6;
}  // namespace streams

/// rows x cols matrix of iid N(0,1) draws from stream (seed, stream).
DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            std::uint64_t stream);

/// A and B must have unit Frobenius norm (1e-8) and power-of-two shapes.
GeneratedInstance gen_deterministic(double lambda, const DenseMatrix& a, const DenseMatrix& b,
                                    double sigma, std::uint64_t seed);

/// A = A~/||A~||_F, B = B~/||B~||_F, lambda = lambda0 ||A~||_F ||B~||_F / 2^((M+N)/2)
/// with A~, B~ standard Gaussian.
GeneratedInstance gen_random_scheme(double lambda0, const Configuration& cfg, double sigma,
                                    std::uint64_t seed);

/// A = sqrt(phi2) [1;0] (x) D1 + sqrt(1-phi2) [0;1] (x) D2, B likewise with
/// D3, D4; vec(D1) _|_ vec(D2) and vec(D3) _|_ vec(D4), all unit. Needs
/// 0 < phi2 <= 0.5 and at least two rows in both A and B.
std::pair<DenseMatrix, DenseMatrix> gen_gap_controlled(double varphi2, const Configuration& cfg,
                                                       std::uint64_t seed);

/// Two independent random-scheme terms sharing one noise draw. Term 1 uses
/// the same streams as gen_random_scheme, so lambda20 == 0 reproduces it.
GeneratedInstance gen_two_term(double lambda10, double lambda20, const Configuration& cfg,
                               double sigma, std::uint64_t seed);

enum class ExperimentKind { estimation, select_one_term, select_two_term };

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::estimation;
  int M = 0, N = 0, m0 = 0, n0 = 0;
  std::vector<double> lambda_grid;
  std::vector<double> varphi2_grid;       // select-one-term: gap-controlled factors
  std::vector<double> lambda_ratio_grid;  // select-two-term: lambda2^2 / lambda1^2
  double sigma = 1.0;
  int reps = 1;
  double kappa = 0;
  std::uint64_t base_seed = 0;

  Configuration true_cfg() const { return {m0, n0, M, N}; }
  /// Throws InputError when a field is out of range.
  void validate() const;
};

/// Fields {kind, M, N, m0, n0, lambda_grid, varphi2_grid?, lambda_ratio_grid?,
/// sigma, reps, kappa, base_seed}. kappa may also be "mse", "aic" or "bic".
ExperimentSpec parse_experiment_spec(const std::string& json_text);
std::string experiment_spec_to_json(const ExperimentSpec& spec);

struct RepRecord {
  std::optional<double> secondary;  // varphi2 or lambda ratio
  double grid_value = 0;
  int rep = 0;
  /// estimation: ln((lambda_hat/lambda - 1)^2); selection: 1 if the true
  /// configuration was chosen, else 0.
  double outcome = 0;
  double factor_error = 0;  // estimation: ln||A_hat-A||_F^2 + ln||B_hat-B||_F^2
  double lambda_hat = 0;
  int chosen_m = -1, chosen_n = -1;
};

struct FrequencyRow {
  std::optional<double> secondary;
  double grid_value = 0;
  int correct = 0;
  int reps = 0;
  double frequency = 0;
};

struct EstimationRow {
  double grid_value = 0;
  int reps = 0;
  double median_lambda_error = 0;
  double median_factor_error = 0;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<RepRecord> records;  // ordered by (secondary, grid point, rep)
  std::vector<FrequencyRow> frequency;
  std::vector<EstimationRow> estimation;
};

/// Seed of one repetition: a pure function of its coordinates.
std::uint64_t rep_seed(std::uint64_t base_seed, std::size_t secondary_index,
                       std::size_t grid_index, std::size_t rep);

/// Runs every (secondary, grid point, rep) cell; opts.threads cells run
/// concurrently, results are independent of scheduling.
ExperimentResult run_experiment(const ExperimentSpec& spec, const IterationControl& ctl = {},
                                ScanOptions opts = {});

/// grid_value,rep,outcome,secondary,chosen_m,chosen_n,lambda_hat,factor_error
std::string records_to_csv(const ExperimentResult& result);
/// Frequency table or per-lambda medians, depending on the kind.
std::string aggregate_to_csv(const ExperimentResult& result);

/// Ordinary least squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// First grid value where the frequency curve reaches `level`, linearly
/// interpolated between neighbouring grid points. Rows must share one
/// secondary value and be sorted by grid value.
std::optional<double> first_crossing(std::span<const FrequencyRow> rows, double level);

}  // namespace kopa
