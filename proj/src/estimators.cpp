#include "gmmfb/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace gmmfb {

TrainStats sample_statistics(const Dataset& data) {
  if (data.count() < 1) throw std::invalid_argument("sample_statistics: empty dataset");
  const int n = data.geometry.channel_dim();
  CVec mean = CVec::Zero(n);
  for (const auto& s : data.samples) mean += s.vectorized();
  mean /= static_cast<double>(data.count());
  CMat cov = CMat::Zero(n, n);
  for (const auto& s : data.samples) {
    const CVec c = s.vectorized() - mean;
    cov.noalias() += c * c.adjoint();
  }
  cov /= static_cast<double>(data.count());
  return {std::move(mean), hermitize(cov)};
}

GmmEstimator::GmmEstimator(const Gmm& model, const PilotConfig& config)
    : obs_(adapt_to_observations(model, config)) {
  const CMat& a = config.observation_op;
  means_.reserve(model.size());
  gains_.reserve(model.size());
  for (int k = 0; k < model.size(); ++k) {
    const auto& c = model.component(k);
    means_.push_back(c.mean);
    // C_k A^H (A C_k A^H + noise I)^{-1}, with the floored observation factor.
    const CMat cross = c.cov * a.adjoint();
    const EigenFactor f = floored_eigen_factor(obs_.component(k).cov);
    if (!f.invertible)
      throw std::domain_error("GmmEstimator: singular observation covariance");
    gains_.push_back(f.solve(CMat(cross.adjoint())).adjoint());
  }
}

CVec GmmEstimator::estimate(const CVec& y) const {
  const RVec r = obs_.responsibilities(y);
  CVec h = CVec::Zero(means_[0].size());
  for (int k = 0; k < static_cast<int>(means_.size()); ++k) {
    if (r[k] <= 0.0) continue;
    h += r[k] * (means_[k] + gains_[k] * (y - obs_.component(k).mean));
  }
  return h;
}

CVec estimate_gmm(const Gmm& model, const PilotConfig& config, const CVec& y) {
  return GmmEstimator(model, config).estimate(y);
}

CVec estimate_lmmse(const TrainStats& stats, const PilotConfig& config, const CVec& y,
                    bool* flagged) {
  const CMat& a = config.observation_op;
  if (stats.mean.size() != a.cols() || y.size() != a.rows())
    throw std::invalid_argument("estimate_lmmse: dimension mismatch");
  const CMat cross = stats.cov * a.adjoint();
  CMat innov = hermitize(a * cross + config.noise_variance * CMat::Identity(a.rows(), a.rows()));
  bool floored = false;
  Eigen::LLT<CMat> llt(innov);
  if (llt.info() != Eigen::Success) {
    // Singular innovation (e.g. zero noise with a rank-deficient prior).
    floored = true;
    const EigenFactor f = floored_eigen_factor(innov);
    if (!f.invertible) throw std::domain_error("estimate_lmmse: degenerate innovation");
    if (flagged) *flagged = floored;
    return stats.mean + cross * f.solve(CVec(y - a * stats.mean));
  }
  if (flagged) *flagged = floored;
  return stats.mean + cross * llt.solve(y - a * stats.mean);
}

CMat build_omp_dictionary(const ArrayGeometry& geometry, int oversampling) {
  geometry.validate();
  if (oversampling < 1) throw std::invalid_argument("build_omp_dictionary: oversampling >= 1");

  // Oversampled unitary-style DFT grid for one axis: n x (oversampling*n),
  // unit-norm columns e(m) = exp(-2 pi i m k / (o*n)) / sqrt(n).
  auto axis_grid = [&](int n) {
    const int cols = oversampling * n;
    CMat g(n, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int m = 0; m < n; ++m)
      for (int k = 0; k < cols; ++k) {
        const double phase = -2.0 * M_PI * static_cast<double>(m) * k / cols;
        g(m, k) = scale * cd(std::cos(phase), std::sin(phase));
      }
    return g;
  };

  // Atoms mirror vectorized rank-one wavefronts: conj(tx atom) ⊗ rx atom.
  const CMat tx_grid = kron(axis_grid(geometry.tx_vertical), axis_grid(geometry.tx_horizontal));
  const CMat rx_grid = axis_grid(geometry.rx_elements);
  CMat dict = kron(tx_grid.conjugate(), rx_grid);
  for (Eigen::Index j = 0; j < dict.cols(); ++j) dict.col(j) /= dict.col(j).norm();
  return dict;
}

CVec estimate_omp(const CMat& dictionary, const PilotConfig& config, const CVec& y,
                  int sparsity, std::vector<int>* support) {
  if (sparsity < 1) throw std::invalid_argument("estimate_omp: sparsity must be >= 1");
  const CMat& a = config.observation_op;
  if (dictionary.rows() != a.cols() || y.size() != a.rows())
    throw std::invalid_argument("estimate_omp: dimension mismatch");

  const CMat phi = a * dictionary;  // effective sensing matrix
  RVec col_norm(phi.cols());
  for (Eigen::Index j = 0; j < phi.cols(); ++j) col_norm[j] = phi.col(j).norm();

  const double y_norm = y.norm();
  CVec residual = y;
  std::vector<int> active;
  CVec coeffs;

  for (int step = 0; step < sparsity; ++step) {
    if (residual.norm() <= 1e-6 * y_norm) break;

    // Greedy pick by absolute normalized correlation with the residual.
    const CVec corr = phi.adjoint() * residual;
    int pick = -1;
    double best = 0.0;
    for (Eigen::Index j = 0; j < corr.size(); ++j) {
      if (col_norm[j] <= 1e-12) continue;
      const double v = std::abs(corr[j]) / col_norm[j];
      if (v > best) {
        best = v;
        pick = static_cast<int>(j);
      }
    }
    if (pick < 0) break;

    CMat sub(phi.rows(), active.size() + 1);
    for (std::size_t i = 0; i < active.size(); ++i) sub.col(i) = phi.col(active[i]);
    sub.col(active.size()) = phi.col(pick);
    Eigen::ColPivHouseholderQR<CMat> qr(sub);
    if (qr.rank() < sub.cols()) break;  // rank-deficient active set: stop early

    active.push_back(pick);
    coeffs = qr.solve(y);
    residual = y - sub * coeffs;
  }

  CVec h = CVec::Zero(dictionary.rows());
  for (std::size_t i = 0; i < active.size(); ++i) h += coeffs[i] * dictionary.col(active[i]);
  if (support) *support = active;
  return h;
}

}  // namespace gmmfb
