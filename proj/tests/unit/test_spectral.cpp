#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "kopa/error.hpp"
#include "kopa/spectral.hpp"
#include "oracle/dense_svd.hpp"

using kopa::DenseMatrix;

namespace {

double residual_norm(const DenseMatrix& x, const kopa::SingularTriplet& t) {
  double s = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double xv = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) xv += x(i, j) * t.v[j];
    s += (xv - t.sigma * t.u[i]) * (xv - t.sigma * t.u[i]);
  }
  return std::sqrt(s);
}

double abs_dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::abs(kopa::dot(a, b));
}

}  // namespace

TEST_CASE("leading triplet of a diagonal matrix") {
  const auto t = kopa::leading_triplet(DenseMatrix{{3, 0}, {0, 1}});
  CHECK(t.sigma == doctest::Approx(3).epsilon(1e-12));
  CHECK(t.u[0] == doctest::Approx(1).epsilon(1e-10));
  CHECK(t.v[0] == doctest::Approx(1).epsilon(1e-10));
  CHECK_FALSE(t.degenerate);
}

TEST_CASE("leading triplet of an exact rank-one matrix") {
  const DenseMatrix u = testutil::random_matrix(7, 1, 1);
  const DenseMatrix v = testutil::random_matrix(1, 5, 2);
  const auto t = kopa::leading_triplet(kopa::matmul(u, v));
  CHECK(t.sigma == doctest::Approx(u.frobenius_norm() * v.frobenius_norm()).epsilon(1e-12));
  const double cu = abs_dot(t.u, std::vector<double>(u.data().begin(), u.data().end())) / u.frobenius_norm();
  const double cv = abs_dot(t.v, std::vector<double>(v.data().begin(), v.data().end())) / v.frobenius_norm();
  CHECK(1 - cu <= 1e-8);
  CHECK(1 - cv <= 1e-8);
}

TEST_CASE("leading triplet matches the Jacobi oracle for every shape up to 32x32") {
  std::uint64_t seed = 100;
  for (std::size_t r : {1, 2, 3, 5, 8, 13, 16, 21, 32}) {
    for (std::size_t c : {1, 2, 4, 7, 16, 31, 32}) {
      const DenseMatrix x = testutil::random_matrix(r, c, ++seed);
      const auto t = kopa::leading_triplet(x, {1e-10, 5000, seed});
      const double ref = oracle::largest_sv(x);
      CHECK(testutil::rel_diff(t.sigma, ref) <= 1e-8);
      CHECK(kopa::norm2(t.u) == doctest::Approx(1).epsilon(1e-10));
      CHECK(kopa::norm2(t.v) == doctest::Approx(1).epsilon(1e-10));
      CHECK(residual_norm(x, t) <= 1e-9 * t.sigma);
    }
  }
}

TEST_CASE("spectral norm of simple matrices") {
  CHECK(kopa::spectral_norm(DenseMatrix::identity(5)) == doctest::Approx(1).epsilon(1e-12));
  CHECK(kopa::spectral_norm(DenseMatrix{{0.5, 0}, {0, -2}}) == doctest::Approx(2).epsilon(1e-12));
  const DenseMatrix x = testutil::random_matrix(10, 10, 3);
  CHECK(testutil::rel_diff(kopa::spectral_norm(x), oracle::largest_sv(x)) <= 1e-8);
}

TEST_CASE("zero matrix gives a flagged degenerate triplet") {
  const auto t = kopa::leading_triplet(DenseMatrix(3, 4));
  CHECK(t.sigma == 0);
  CHECK(t.degenerate);
  CHECK(kopa::norm2(t.u) == doctest::Approx(1));
  CHECK(kopa::norm2(t.v) == doctest::Approx(1));
}

TEST_CASE("top-k triplets") {
  SUBCASE("diagonal") {
    DenseMatrix d(3, 3);
    d(0, 0) = 3;
    d(1, 1) = 2;
    d(2, 2) = 1;
    const auto ts = kopa::top_k_triplets(d, 2);
    CHECK(ts[0].sigma == doctest::Approx(3).epsilon(1e-10));
    CHECK(ts[1].sigma == doctest::Approx(2).epsilon(1e-10));
  }
  SUBCASE("rank deficient") {
    const DenseMatrix x = kopa::matmul(testutil::random_matrix(6, 2, 4), testutil::random_matrix(2, 6, 5));
    const auto ts = kopa::top_k_triplets(x, 3);
    CHECK(ts[2].sigma <= 1e-8 * ts[0].sigma);
  }
  SUBCASE("random 12x20 against the oracle") {
    const DenseMatrix x = testutil::random_matrix(12, 20, 6);
    const auto ts = kopa::top_k_triplets(x, 4);
    const auto ref = oracle::jacobi_svd(x);
    for (std::size_t k = 0; k < 4; ++k) CHECK(testutil::rel_diff(ts[k].sigma, ref.s[k]) <= 1e-7);
  }
  SUBCASE("k out of range") {
    CHECK_THROWS_AS(kopa::top_k_triplets(DenseMatrix(3, 5), 4), kopa::DimensionError);
    CHECK_THROWS_AS(kopa::top_k_triplets(DenseMatrix(3, 5), 0), kopa::DimensionError);
  }
}

TEST_CASE("deflation keeps vectors orthogonal and the residual shrinks to zero") {
  for (std::uint64_t seed : {7, 8, 9}) {
    const DenseMatrix x = testutil::random_matrix(9, 14, seed);
    const auto ts = kopa::top_k_triplets(x, 9);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      for (std::size_t j = i + 1; j < ts.size(); ++j) {
        CHECK(abs_dot(ts[i].u, ts[j].u) <= 1e-8);
        CHECK(abs_dot(ts[i].v, ts[j].v) <= 1e-8);
      }
    }
    DenseMatrix r = x;
    double prev = r.frobenius_norm();
    for (const auto& t : ts) {
      for (std::size_t i = 0; i < r.rows(); ++i)
        for (std::size_t j = 0; j < r.cols(); ++j) r(i, j) -= t.sigma * t.u[i] * t.v[j];
      const double now = r.frobenius_norm();
      CHECK(now <= prev + 1e-12 * x.frobenius_norm());
      prev = now;
    }
    CHECK(prev <= 1e-8 * x.frobenius_norm());
  }
}

TEST_CASE("sign convention and determinism") {
  const DenseMatrix x = testutil::random_matrix(6, 9, 10);
  const auto a = kopa::leading_triplet(x, {1e-10, 5000, 3});
  const auto b = kopa::leading_triplet(x, {1e-10, 5000, 3});
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);
  CHECK(a.u[0] > 0);
  const auto neg = kopa::leading_triplet(-1.0 * x, {1e-10, 5000, 3});
  CHECK(neg.u[0] > 0);
  CHECK(testutil::rel_diff(neg.sigma, a.sigma) <= 1e-12);
}

TEST_CASE("iteration cap raises a convergence error carrying the best iterate") {
  DenseMatrix x(2, 2);
  x(0, 0) = 1.0;
  x(1, 1) = 0.999;
  x(0, 1) = 0.3;
  try {
    (void)kopa::leading_triplet(x, {1e-14, 2, 0});
    FAIL("expected ConvergenceError");
  } catch (const kopa::ConvergenceError& e) {
    CHECK(e.best_iterate().sigma > 0);
    CHECK(e.best_iterate().u.size() == 2);
  }
  CHECK_THROWS_AS(kopa::leading_triplet(x, {0.0, 10, 0}), kopa::DomainError);
  CHECK_THROWS_AS(kopa::leading_triplet(x, {1e-10, 0, 0}), kopa::DomainError);
}

TEST_CASE("near ties are flagged") {
  DenseMatrix d(3, 3);
  d(0, 0) = 1.0;
  d(1, 1) = 1.0 - 1e-9;
  d(2, 2) = 0.5;
  const auto ts = kopa::top_k_triplets(d, 2);
  CHECK(ts[0].near_tie);
  CHECK(ts[1].near_tie);
  DenseMatrix e(2, 2);
  e(0, 0) = 2.0;
  e(1, 1) = 1.0;
  CHECK_FALSE(kopa::top_k_triplets(e, 2)[0].near_tie);
}

TEST_CASE("principal angles") {
  const DenseMatrix m = testutil::random_matrix(6, 3, 11);
  CHECK(kopa::principal_angle_cos(m, m) == doctest::Approx(1).epsilon(1e-8));
  DenseMatrix a(4, 2), b(4, 2);
  a(0, 0) = 1;
  a(1, 1) = 1;
  b(2, 0) = 1;
  b(3, 1) = 1;
  CHECK(kopa::principal_angle_cos(a, b) == doctest::Approx(0).epsilon(1e-12));
  const DenseMatrix e1 = DenseMatrix::column(std::vector<double>{1, 0, 0});
  const DenseMatrix e12 = DenseMatrix::column(std::vector<double>{1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0});
  CHECK(kopa::principal_angle_cos(e1, e12) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-10));
  CHECK_THROWS_AS(kopa::principal_angle_cos(DenseMatrix(3, 2), e1), kopa::DomainError);
  CHECK_THROWS_AS(kopa::principal_angle_cos(DenseMatrix(2, 2), e1), kopa::DimensionError);

  // Rank-deficient inputs: the basis only spans the true column space.
  const DenseMatrix low = kopa::matmul(testutil::random_matrix(8, 2, 12), testutil::random_matrix(2, 5, 13));
  CHECK(kopa::column_space_basis(low).cols() == 2);
}

TEST_CASE("norm-sum bound closed form") {
  CHECK(kopa::norm_sum_bound(3, 2, 0, 0) == doctest::Approx(25).epsilon(1e-14));
  const double h = std::numbers::pi / 2;
  CHECK(kopa::norm_sum_bound(3, 2, h, h) == doctest::Approx(9).epsilon(1e-12));
  CHECK_THROWS_AS(kopa::norm_sum_bound(-1, 2, 0, 0), kopa::DomainError);
  CHECK_THROWS_AS(kopa::norm_sum_bound(1, 2, 2.0, 0), kopa::DomainError);
}

TEST_CASE("norm-sum bound dominates sampled pairs") {
  kopa::CounterRng rng(21);
  for (std::size_t dim : {2, 4}) {
    for (int trial = 0; trial < 200; ++trial) {
      const std::uint64_t s = rng.next_u64();
      const DenseMatrix m1 = testutil::random_matrix(dim, dim, s);
      // Low-rank second term so the angles are informative.
      const DenseMatrix m2 = kopa::matmul(testutil::random_matrix(dim, 1, s + 1), testutil::random_matrix(1, dim, s + 2));
      const double mu = oracle::largest_sv(m1);
      const double nu = oracle::largest_sv(m2);
      const double theta = std::acos(kopa::principal_angle_cos(m1, m2));
      const double eta = std::acos(kopa::principal_angle_cos(m1.transpose(), m2.transpose()));
      const double lhs = oracle::largest_sv(m1 + m2);
      CHECK(lhs * lhs <= kopa::norm_sum_bound(mu, nu, theta, eta) + 1e-10);
    }
  }
}

TEST_CASE("singular_values agrees with the oracle") {
  const DenseMatrix x = testutil::random_matrix(9, 6, 22);
  const auto sv = kopa::singular_values(x);
  const auto ref = oracle::jacobi_svd(x);
  REQUIRE(sv.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) CHECK(testutil::rel_diff(sv[k], ref.s[k]) <= 1e-10);
}
