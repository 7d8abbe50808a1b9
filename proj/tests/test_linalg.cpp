#include <doctest.h>

#include <cmath>
#include <string>

#include "gmmfb/linalg.hpp"
#include "gmmfb/rng.hpp"
#include "test_util.hpp"

using namespace gmmfb;
using testutil::max_abs;

TEST_CASE("dft_matrix is unitary") {
  for (int n : {1, 2, 5, 8}) {
    const CMat f = dft_matrix(n);
    CHECK(max_abs(f.adjoint() * f - CMat::Identity(n, n)) < 1e-12);
    CHECK(max_abs(f * f.adjoint() - CMat::Identity(n, n)) < 1e-12);
  }
  CHECK_THROWS_AS(dft_matrix(0), std::invalid_argument);
}

TEST_CASE("dft_matrix first row/column is constant 1/sqrt(n)") {
  const CMat f = dft_matrix(4);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(f(0, i) - cd(0.5, 0.0)) < 1e-14);
    CHECK(std::abs(f(i, 0) - cd(0.5, 0.0)) < 1e-14);
  }
}

TEST_CASE("kron reproduces the blockwise definition") {
  Rng rng(42);
  const CMat a = testutil::random_cmat(rng, 3, 2);
  const CMat b = testutil::random_cmat(rng, 2, 4);
  const CMat k = kron(a, b);
  REQUIRE(k.rows() == 6);
  REQUIRE(k.cols() == 8);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 4; ++q)
          CHECK(std::abs(k(i * 2 + p, j * 4 + q) - a(i, j) * b(p, q)) < 1e-14);
}

TEST_CASE("kron mixed-product property") {
  Rng rng(7);
  const CMat a = testutil::random_cmat(rng, 2, 3);
  const CMat b = testutil::random_cmat(rng, 3, 2);
  const CMat c = testutil::random_cmat(rng, 4, 2);
  const CMat d = testutil::random_cmat(rng, 2, 3);
  CHECK(max_abs(kron(a * b, c * d) - kron(a, c) * kron(b, d)) < 1e-12);
}

TEST_CASE("hermitize returns the Hermitian part") {
  Rng rng(3);
  const CMat m = testutil::random_cmat(rng, 4, 4);
  const CMat h = hermitize(m);
  CHECK(max_abs(h - h.adjoint()) < 1e-15);
  CHECK(max_abs(h - 0.5 * (m + m.adjoint())) < 1e-15);
}

TEST_CASE("floored_eigen_factor matches dense linear algebra on a PD matrix") {
  Rng rng(11);
  const int n = 5;
  const CMat c = testutil::random_pd(rng, n);
  const EigenFactor f = floored_eigen_factor(c);
  REQUIRE(f.invertible);

  // log-determinant against the product of eigenvalues of the raw matrix
  Eigen::SelfAdjointEigenSolver<CMat> es(c);
  CHECK(f.log_det == doctest::Approx(es.eigenvalues().array().log().sum()).epsilon(1e-12));

  // quadratic form and solves against an explicit inverse
  const CMat inv = c.inverse();
  const CVec x = testutil::random_cvec(rng, n);
  CHECK(f.quad_form(x) == doctest::Approx((x.adjoint() * inv * x)(0, 0).real()).epsilon(1e-10));
  CHECK((f.solve(x) - inv * x).norm() < 1e-10 * x.norm());
  const CMat b = testutil::random_cmat(rng, n, 3);
  CHECK(max_abs(f.solve(b) - inv * b) < 1e-10);

  // square-root factor reconstructs the matrix
  const CMat s = f.sqrt_factor();
  CHECK(max_abs(s * s.adjoint() - c) < 1e-10);
}

TEST_CASE("floored_eigen_factor lifts small eigenvalues to the relative floor") {
  CMat c = CMat::Zero(2, 2);
  c(0, 0) = 2.0;
  c(1, 1) = 0.0;  // rank deficient
  const EigenFactor f = floored_eigen_factor(c);
  REQUIRE(f.invertible);
  const double floor = kEigFloorRel * 2.0 / 2.0;
  CHECK(f.values.minCoeff() == doctest::Approx(floor).epsilon(1e-12));
  CHECK(f.values.maxCoeff() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("floored_eigen_factor flags the zero matrix as singular") {
  const EigenFactor f = floored_eigen_factor(CMat::Zero(3, 3));
  CHECK_FALSE(f.invertible);
  CHECK_THROWS_AS(f.quad_form(CVec::Ones(3)), std::domain_error);
  CHECK_THROWS_AS(f.solve(CVec(CVec::Ones(3))), std::domain_error);
}

TEST_CASE("floored_eigen_factor rejects condition numbers beyond the limit") {
  CMat c = CMat::Zero(2, 2);
  c(0, 0) = 1.0;
  c(1, 1) = 1e-20;
  // With the floor disabled the raw spread exceeds the allowed condition number.
  CHECK_THROWS_AS(floored_eigen_factor(c, 0.0), std::domain_error);
  // The default floor repairs it.
  CHECK(floored_eigen_factor(c).invertible);
}

TEST_CASE("log_sum_exp handles large and degenerate inputs") {
  RVec v(2);
  v << 0.0, std::log(2.0);
  CHECK(log_sum_exp(v) == doctest::Approx(std::log(3.0)).epsilon(1e-14));

  RVec big(2);
  big << 1000.0, 1000.0;
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));

  RVec small(2);
  small << -1e9, -1e9 + std::log(3.0);
  CHECK(log_sum_exp(small) == doctest::Approx(-1e9 + std::log(4.0)).epsilon(1e-12));

  RVec inf(2);
  inf << -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp(inf) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ULL);
  const std::string a = "a";
  CHECK(fnv1a64(a.data(), a.size()) == 0xaf63dc4c8601ec8cULL);
  const std::string foobar = "foobar";
  CHECK(fnv1a64(foobar.data(), foobar.size()) == 0x85944171f73967e8ULL);
}

TEST_CASE("rng streams are deterministic and well scaled") {
  Rng a(123), b(123), c(124);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_diff = any_diff || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);

  // moment sanity on big samples
  Rng r(9);
  const int n = 200000;
  double mean = 0.0, var = 0.0, cmean = 0.0, cvar = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    mean += x;
    var += x * x;
    const cd z = r.cnormal();
    cmean += std::abs(z) / n;
    cvar += std::norm(z);
  }
  mean /= n;
  var = var / n - mean * mean;
  cvar /= n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
  CHECK(cvar == doctest::Approx(1.0).epsilon(0.02));

  // uniform() stays in [0,1)
  Rng u(77);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = u.uniform();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
  CHECK(derive_seed(5, 0, 0) == derive_seed(5, 0, 0));
}
