#include "gmmfb/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace gmmfb {

CMat dft_matrix(int n) {
  if (n <= 0) throw std::invalid_argument("dft_matrix: n must be positive");
  CMat f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int m = 0; m < n; ++m) {
    for (int k = 0; k < n; ++k) {
      const double phase = -2.0 * M_PI * static_cast<double>(m) * static_cast<double>(k) / n;
      f(m, k) = scale * cd(std::cos(phase), std::sin(phase));
    }
  }
  return f;
}

CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double EigenFactor::quad_form(const CVec& x) const {
  if (!invertible) throw std::domain_error("EigenFactor: singular covariance");
  const CVec z = vectors.adjoint() * x;
  double q = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) q += std::norm(z[i]) / values[i];
  return q;
}

CVec EigenFactor::solve(const CVec& x) const {
  if (!invertible) throw std::domain_error("EigenFactor: singular covariance");
  CVec z = vectors.adjoint() * x;
  z.array() /= values.array().cast<cd>();
  return vectors * z;
}

CMat EigenFactor::solve(const CMat& x) const {
  if (!invertible) throw std::domain_error("EigenFactor: singular covariance");
  CMat z = vectors.adjoint() * x;
  for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) /= values[i];
  return vectors * z;
}

CMat EigenFactor::sqrt_factor() const {
  return vectors * values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

EigenFactor floored_eigen_factor(const CMat& cov, double rel_floor) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("floored_eigen_factor: not square");
  const Eigen::Index n = cov.rows();
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(cov));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("floored_eigen_factor: eigendecomposition failed");

  EigenFactor f;
  f.vectors = es.eigenvectors();
  f.values = es.eigenvalues();
  const double trace = f.values.cwiseMax(0.0).sum();
  const double floor = rel_floor * trace / static_cast<double>(n);
  f.values = f.values.cwiseMax(floor);

  const double vmax = f.values.maxCoeff();
  const double vmin = f.values.minCoeff();
  f.invertible = vmin > 0.0;
  if (f.invertible && vmax / vmin > kConditionLimit)
    throw std::domain_error("floored_eigen_factor: covariance numerically singular");
  if (f.invertible) f.log_det = f.values.array().log().sum();
  return f;
}

double log_sum_exp(const RVec& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::isfinite(v[i])) s += std::exp(v[i] - m);
  return m + std::log(s);
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gmmfb
