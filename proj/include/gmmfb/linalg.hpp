#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

namespace gmmfb {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Relative eigenvalue floor (times trace/N) used whenever a covariance is
// inverted or factorized.
inline constexpr double kEigFloorRel = 1e-6;

// Condition-number ceiling past which a floored covariance is reported as
// numerically singular.
inline constexpr double kConditionLimit = 1e14;

// Unitary DFT matrix: F(m, k) = exp(-2*pi*i*m*k/n) / sqrt(n), F^H F = I.
CMat dft_matrix(int n);

// Kronecker product (a ⊗ b).
CMat kron(const CMat& a, const CMat& b);

inline CMat hermitize(const CMat& m) { return 0.5 * (m + m.adjoint()); }

// Eigendecomposition of a Hermitian matrix with eigenvalues clamped from
// below at rel_floor * trace / n.  Serves as the single code path for
// covariance inverses, log-determinants, quadratic forms and square roots.
struct EigenFactor {
  CMat vectors;   // unitary, columns are eigenvectors (ascending eigenvalues)
  RVec values;    // floored eigenvalues
  double log_det = -std::numeric_limits<double>::infinity();
  bool invertible = false;  // false when the floor itself is zero (zero trace)

  // x^H C^{-1} x for the floored covariance.
  double quad_form(const CVec& x) const;
  // C^{-1} x
  CVec solve(const CVec& x) const;
  // C^{-1} X (column block)
  CMat solve(const CMat& x) const;
  // B with B B^H = C (eigenvalue square root; negative values clamped to 0).
  CMat sqrt_factor() const;
};

EigenFactor floored_eigen_factor(const CMat& cov, double rel_floor = kEigFloorRel);

// log(sum_i exp(v_i)) with max subtraction; -inf input entries are skipped.
double log_sum_exp(const RVec& v);

// FNV-1a 64-bit hash of a byte range, used for file fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t n);

}  // namespace gmmfb
