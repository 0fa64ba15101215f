#include "kopa/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "kopa/rng.hpp"

namespace kopa {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Deflated working copy of X plus the Gram matrix of its smaller side.
struct Workspace {
  RowMat x;
  Eigen::MatrixXd gram;
  bool left = true;  // gram == x x^T, the iterate lives in the column space
  double scale = 0;  // ||X||_F^2 of the undeflated input
};

Workspace make_workspace(const DenseMatrix& in) {
  Workspace w;
  w.x = Eigen::Map<const RowMat>(in.data().data(), static_cast<Eigen::Index>(in.rows()),
                                 static_cast<Eigen::Index>(in.cols()));
  w.left = in.rows() <= in.cols();
  const Eigen::Index d = w.left ? w.x.rows() : w.x.cols();
  w.gram = Eigen::MatrixXd::Zero(d, d);
  if (w.left) {
    w.gram.selfadjointView<Eigen::Lower>().rankUpdate(w.x);
  } else {
    w.gram.selfadjointView<Eigen::Lower>().rankUpdate(w.x.transpose());
  }
  w.gram.triangularView<Eigen::StrictlyUpper>() = w.gram.transpose();
  w.scale = w.gram.trace();
  return w;
}

void project_out(Vec& y, const std::vector<Vec>& basis) {
  for (const Vec& b : basis) y -= b.dot(y) * b;
}

// Unit vector orthogonal to `basis`, drawn from the seeded stream.
Vec random_complement(Eigen::Index dim, const std::vector<Vec>& basis, CounterRng& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    Vec x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x(i) = rng.gaussian();
    project_out(x, basis);
    project_out(x, basis);
    const double nx = x.norm();
    if (nx > 1e-8) return x / nx;
  }
  // Only reachable when basis already spans the space.
  Vec x = Vec::Zero(dim);
  return x;
}

struct PowerResult {
  Vec x;
  int iterations = 0;
  bool converged = false;
  bool subspace_only = false;  // Rayleigh quotient settled, vector still rotating
  double contraction = -1;     // residual ratio per sweep, ~ (sigma2/sigma1)^2; -1 if unknown
};

// Power iteration on a symmetric PSD matrix restricted to the complement of
// `prior`. Converged when ||G x - rho x|| <= tol * rho, which for a Gram
// matrix is ||X v - sigma u|| <= tol * sigma. If the Rayleigh quotient has
// settled but the residual would not reach that within max_iter sweeps
// (near-tied leading values), the current iterate is accepted as a vector of
// the leading invariant subspace.
PowerResult power_iterate(const Eigen::MatrixXd& g, const std::vector<Vec>& prior, double scale,
                          const IterationControl& ctl, CounterRng& rng) {
  PowerResult r;
  r.x = random_complement(g.rows(), prior, rng);
  // Entries of a (deflated) Gram carry roundoff of order eps * ||X||_F^2.
  const double abs_floor = 16.0 * kEps * scale;
  double rho_prev = 0;
  double res_prev = -1;
  bool rayleigh_settled = false;
  constexpr int kWindow = 4;
  double log_ratios[kWindow] = {};
  int n_ratios = 0;
  Vec y(g.rows());
  for (int it = 1; it <= ctl.max_iter; ++it) {
    y.noalias() = g * r.x;
    project_out(y, prior);
    const double rho = r.x.dot(y);
    const double ny = y.norm();
    r.iterations = it;
    if (ny <= abs_floor) {
      r.converged = true;
      return r;
    }
    const double res = (y - rho * r.x).norm();
    const double target = ctl.tol * std::abs(rho) + abs_floor;
    r.x = y / ny;
    if (res <= target) {
      r.converged = true;
      return r;
    }
    if (it > 1 && std::abs(rho - rho_prev) <= target) rayleigh_settled = true;
    if (res_prev > 0) {
      log_ratios[n_ratios % kWindow] = std::log(res / res_prev);
      ++n_ratios;
      if (n_ratios >= kWindow) {
        double mean = 0;
        for (double l : log_ratios) mean += l;
        mean /= kWindow;
        r.contraction = std::exp(mean);
        if (rayleigh_settled) {
          const double needed = mean < 0 ? std::log(target / res) / mean : HUGE_VAL;
          if (it + needed > ctl.max_iter) {
            r.converged = true;
            r.subspace_only = true;
            return r;
          }
        }
      }
    }
    rho_prev = rho;
    res_prev = res;
  }
  if (rayleigh_settled) {
    r.converged = true;
    r.subspace_only = true;
  }
  return r;
}

// Leading sign convention: first entry with |x_i| > 1e-12 max|x| is positive.
bool needs_flip(const Vec& x) {
  const double cutoff = 1e-12 * x.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) > cutoff) return x(i) < 0;
  }
  return false;
}

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<SingularTriplet> deflation_run(const DenseMatrix& input, std::size_t k,
                                           const IterationControl& ctl) {
  ctl.validate();
  Workspace w = make_workspace(input);
  const Eigen::Index other_dim = w.left ? w.x.cols() : w.x.rows();
  const double norm_x = std::sqrt(w.scale);
  CounterRng rng(ctl.seed, 0x5eed);

  std::vector<Vec> iter_basis;
  std::vector<Vec> other_basis;
  std::vector<SingularTriplet> out;
  out.reserve(k);

  for (std::size_t t = 0; t < k; ++t) {
    PowerResult pr;
    if (w.scale > 0) {
      pr = power_iterate(w.gram, iter_basis, w.scale, ctl, rng);
    } else {
      pr.x = random_complement(w.gram.rows(), iter_basis, rng);
      pr.converged = true;
    }
    Vec x_iter = pr.x;
    Vec x_other = w.left ? Vec(w.x.transpose() * x_iter) : Vec(w.x * x_iter);
    double sigma = x_other.norm();

    SingularTriplet trip;
    trip.iterations = pr.iterations;
    if (w.scale == 0 || sigma <= 1e-13 * norm_x) {
      trip.degenerate = true;
      x_other = random_complement(other_dim, other_basis, rng);
      if (w.scale == 0) sigma = 0;
    } else {
      x_other /= sigma;
      project_out(x_other, other_basis);
      project_out(x_other, other_basis);
      x_other.normalize();
    }
    if (pr.subspace_only) {
      trip.near_tie = true;
    } else if (pr.contraction > 0 && pr.contraction < 1) {
      trip.near_tie = (1.0 - std::sqrt(pr.contraction)) < kNearTieGap;
    }

    Vec u = w.left ? x_iter : x_other;
    Vec v = w.left ? x_other : x_iter;
    if (needs_flip(u)) {
      u = -u;
      v = -v;
    }
    trip.sigma = sigma;
    trip.u = to_std(u);
    trip.v = to_std(v);

    if (!pr.converged) {
      throw ConvergenceError("power iteration did not converge within " +
                                 std::to_string(ctl.max_iter) + " iterations (triplet " +
                                 std::to_string(t + 1) + ")",
                             trip);
    }

    // Hotelling deflation of both the working matrix and its Gram.
    if (sigma > 0 && t + 1 < k) {
      if (w.left) {
        const Vec xv = w.x * v;
        w.gram.noalias() -= sigma * (xv * u.transpose() + u * xv.transpose());
        w.gram.noalias() += (sigma * sigma) * (u * u.transpose());
      } else {
        const Vec xtu = w.x.transpose() * u;
        w.gram.noalias() -= sigma * (xtu * v.transpose() + v * xtu.transpose());
        w.gram.noalias() += (sigma * sigma) * (v * v.transpose());
      }
      w.x.noalias() -= sigma * (u * v.transpose());
    }
    iter_basis.push_back(w.left ? u : v);
    other_basis.push_back(w.left ? v : u);
    out.push_back(std::move(trip));
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const SingularTriplet& a, const SingularTriplet& b) { return a.sigma > b.sigma; });
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    if (out[i].sigma > 0 && (out[i].sigma - out[i + 1].sigma) / out[i].sigma < kNearTieGap) {
      out[i].near_tie = true;
      out[i + 1].near_tie = true;
    }
  }
  return out;
}

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  return Eigen::Map<const RowMat>(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                                  static_cast<Eigen::Index>(m.cols()));
}

DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
  DenseMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

}  // namespace

void IterationControl::validate() const {
  if (!(tol > 0) || !std::isfinite(tol)) throw DomainError("IterationControl: tol must be > 0");
  if (max_iter < 1) throw DomainError("IterationControl: max_iter must be >= 1");
}

SingularTriplet leading_triplet(const DenseMatrix& x, const IterationControl& ctl) {
  return deflation_run(x, 1, ctl).front();
}

std::vector<SingularTriplet> top_k_triplets(const DenseMatrix& x, std::size_t k,
                                            const IterationControl& ctl) {
  if (k < 1 || k > std::min(x.rows(), x.cols())) {
    throw DimensionError("top_k_triplets: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(std::min(x.rows(), x.cols())) + "]");
  }
  return deflation_run(x, k, ctl);
}

double spectral_norm(const DenseMatrix& x, const IterationControl& ctl) {
  return leading_triplet(x, ctl).sigma;
}

std::vector<double> singular_values(const DenseMatrix& x) {
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(to_eigen(x));
  return to_std(svd.singularValues());
}

DenseMatrix column_space_basis(const DenseMatrix& m) {
  const double top = spectral_norm(m);
  if (top == 0) throw DomainError("column_space_basis: zero matrix");
  const double threshold = 1e-10 * top;

  Eigen::MatrixXd a = to_eigen(m);
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  std::vector<Vec> basis;
  std::vector<bool> used(static_cast<std::size_t>(cols), false);
  while (static_cast<Eigen::Index>(basis.size()) < std::min(rows, cols)) {
    Eigen::Index pivot = -1;
    double best = threshold;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double nj = a.col(j).norm();
      if (nj > best) {
        best = nj;
        pivot = j;
      }
    }
    if (pivot < 0) break;
    used[static_cast<std::size_t>(pivot)] = true;
    Vec q = a.col(pivot);
    project_out(q, basis);
    q.normalize();
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!used[static_cast<std::size_t>(j)]) a.col(j) -= q.dot(a.col(j)) * q;
    }
    basis.push_back(std::move(q));
  }
  Eigen::MatrixXd qmat(rows, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) qmat.col(static_cast<Eigen::Index>(i)) = basis[i];
  return from_eigen(qmat);
}

double principal_angle_cos(const DenseMatrix& m1, const DenseMatrix& m2) {
  if (m1.rows() != m2.rows()) {
    throw DimensionError("principal_angle_cos: row counts differ (" + std::to_string(m1.rows()) +
                         " vs " + std::to_string(m2.rows()) + ")");
  }
  if (m1.max_abs() == 0 || m2.max_abs() == 0) {
    throw DomainError("principal_angle_cos: zero matrix has no column space");
  }
  const Eigen::MatrixXd q1 = to_eigen(column_space_basis(m1));
  const Eigen::MatrixXd q2 = to_eigen(column_space_basis(m2));
  const Eigen::MatrixXd c = q1.transpose() * q2;
  const double cosine = spectral_norm(from_eigen(c));
  return std::clamp(cosine, 0.0, 1.0);
}

double norm_sum_bound(double mu, double nu, double theta, double eta_angle) {
  constexpr double half_pi = std::numbers::pi / 2;
  if (!(mu >= 0) || !(nu >= 0) || !std::isfinite(mu) || !std::isfinite(nu)) {
    throw DomainError("norm_sum_bound: mu and nu must be finite and nonnegative");
  }
  if (!(theta >= 0 && theta <= half_pi) || !(eta_angle >= 0 && eta_angle <= half_pi)) {
    throw DomainError("norm_sum_bound: angles must lie in [0, pi/2]");
  }
  const double base = mu * mu + nu * nu + 2 * mu * nu * std::cos(theta) * std::cos(eta_angle);
  const double s = std::sin(theta) * std::sin(eta_angle);
  const double disc = base * base - 4 * mu * mu * nu * nu * s * s;
  return 0.5 * (std::sqrt(std::max(disc, 0.0)) + base);
}

}  // namespace kopa
