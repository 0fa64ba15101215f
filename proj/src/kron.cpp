#include "kopa/kron.hpp"

#include <bit>
#include <limits>
#include <string>

#include "kopa/error.hpp"

namespace kopa {

namespace {

// Keeps 2^(M+N) well inside size_t and the eta computation overflow-free.
constexpr int kMaxTotalExponent = 60;

std::string shape(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_ambient(const DenseMatrix& c, const Configuration& cfg, const char* op) {
  if (c.rows() != (std::size_t{1} << cfg.M()) || c.cols() != (std::size_t{1} << cfg.N())) {
    throw DimensionError(std::string(op) + ": expected a " +
                         shape(std::size_t{1} << cfg.M(), std::size_t{1} << cfg.N()) +
                         " matrix, got " + shape(c.rows(), c.cols()));
  }
}

}  // namespace

Configuration::Configuration(int m, int n, int M, int N) : m_(m), n_(n), M_(M), N_(N) {
  if (M < 0 || N < 0 || m < 0 || n < 0 || m > M || n > N) {
    throw DomainError("Configuration: need 0<=m<=M, 0<=n<=N; got (m,n)=(" + std::to_string(m) +
                      "," + std::to_string(n) + ") in (M,N)=(" + std::to_string(M) + "," +
                      std::to_string(N) + ")");
  }
  if (M + N > kMaxTotalExponent) {
    throw DimensionError("Configuration: 2^(M+N) exceeds addressable size");
  }
}

std::optional<int> dyadic_exponent(std::size_t value) noexcept {
  if (value == 0 || !std::has_single_bit(value)) return std::nullopt;
  return std::countr_zero(value);
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  const std::size_t limit = std::numeric_limits<std::size_t>::max();
  if (a.rows() > limit / b.rows() || a.cols() > limit / b.cols() ||
      a.rows() * b.rows() > limit / (a.cols() * b.cols())) {
    throw DimensionError("kron: result dimensions overflow");
  }
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      for (std::size_t k = 0; k < b.rows(); ++k) {
        const std::size_t row = i * b.rows() + k;
        for (std::size_t l = 0; l < b.cols(); ++l) out(row, j * b.cols() + l) = aij * b(k, l);
      }
    }
  }
  return out;
}

std::vector<double> vec(const DenseMatrix& a) {
  return std::vector<double>(a.data().begin(), a.data().end());
}

DenseMatrix unvec(std::span<const double> v, std::size_t p, std::size_t q) {
  if (p == 0 || q == 0 || v.size() != p * q) {
    throw DimensionError("unvec: cannot shape " + std::to_string(v.size()) + " values as " +
                         shape(p, q));
  }
  return DenseMatrix(p, q, std::vector<double>(v.begin(), v.end()));
}

// Flat-index bijection. With C of size (p p') x (q q'), entry (i p' + k, j q' + l)
// moves to (i q + j, k q' + l) of the (p q) x (p' q') result.
DenseMatrix rearrange(const DenseMatrix& c, const Configuration& cfg) {
  require_ambient(c, cfg, "rearrange");
  const std::size_t q = cfg.a_cols();
  const std::size_t bp = cfg.b_rows();
  const std::size_t bq = cfg.b_cols();
  const int log_bp = cfg.m_dagger();
  const int log_bq = cfg.n_dagger();
  DenseMatrix out(cfg.rearranged_rows(), cfg.rearranged_cols());
  auto dst = out.data();
  for (std::size_t row = 0; row < c.rows(); ++row) {
    const std::size_t i = row >> log_bp;
    const std::size_t k = row & (bp - 1);
    auto src = c.row_span(row);
    for (std::size_t j = 0; j < q; ++j) {
      double* target = dst.data() + (i * q + j) * out.cols() + k * bq;
      const double* from = src.data() + (j << log_bq);
      for (std::size_t l = 0; l < bq; ++l) target[l] = from[l];
    }
  }
  return out;
}

DenseMatrix inverse_rearrange(const DenseMatrix& r, const Configuration& cfg) {
  if (r.rows() != cfg.rearranged_rows() || r.cols() != cfg.rearranged_cols()) {
    throw DimensionError("inverse_rearrange: expected " +
                         shape(cfg.rearranged_rows(), cfg.rearranged_cols()) + ", got " +
                         shape(r.rows(), r.cols()));
  }
  const std::size_t q = cfg.a_cols();
  const std::size_t bp = cfg.b_rows();
  const std::size_t bq = cfg.b_cols();
  DenseMatrix out(std::size_t{1} << cfg.M(), std::size_t{1} << cfg.N());
  for (std::size_t block = 0; block < r.rows(); ++block) {
    const std::size_t i = block / q;
    const std::size_t j = block % q;
    auto src = r.row_span(block);
    for (std::size_t k = 0; k < bp; ++k)
      for (std::size_t l = 0; l < bq; ++l) out(i * bp + k, j * bq + l) = src[k * bq + l];
  }
  return out;
}

ConfigLattice candidate_configs(int M, int N) {
  if (M < 0 || N < 0) throw DomainError("candidate_configs: negative exponent");
  ConfigLattice lattice{M, N, {}};
  for (int m = 0; m <= M; ++m) {
    for (int n = 0; n <= N; ++n) {
      Configuration cfg(m, n, M, N);
      if (!cfg.is_corner()) lattice.entries.push_back(cfg);
    }
  }
  if (lattice.entries.empty()) {
    throw DomainError("candidate_configs: empty configuration lattice for (M,N)=(" +
                      std::to_string(M) + "," + std::to_string(N) + ")");
  }
  return lattice;
}

DenseMatrix pad_to_dyadic(const DenseMatrix& c) {
  const std::size_t rows = std::bit_ceil(c.rows());
  const std::size_t cols = std::bit_ceil(c.cols());
  DenseMatrix out(rows, cols);
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) out(i, j) = c(i, j);
  return out;
}

}  // namespace kopa
