#include "gmmfb/gmm.hpp"

#include <cmath>
#include <stdexcept>

namespace gmmfb {

std::string to_string(CovarianceKind kind) {
  switch (kind) {
    case CovarianceKind::full: return "full";
    case CovarianceKind::kronecker: return "kron";
    case CovarianceKind::toeplitz_kron: return "toeplitz";
    case CovarianceKind::circulant_kron: return "circulant";
  }
  throw std::logic_error("to_string: unknown covariance kind");
}

CovarianceKind covariance_kind_from_string(std::string_view name) {
  if (name == "full") return CovarianceKind::full;
  if (name == "kron" || name == "kronecker") return CovarianceKind::kronecker;
  if (name == "toeplitz") return CovarianceKind::toeplitz_kron;
  if (name == "circulant") return CovarianceKind::circulant_kron;
  throw std::invalid_argument("unknown covariance structure: " + std::string(name));
}

double log_gaussian_density(const CVec& x, const CVec& mean, const CMat& cov) {
  if (x.size() != mean.size() || cov.rows() != x.size())
    throw std::invalid_argument("log_gaussian_density: dimension mismatch");
  const EigenFactor f = floored_eigen_factor(cov);
  if (!f.invertible) throw std::domain_error("log_gaussian_density: singular covariance");
  const double n = static_cast<double>(x.size());
  return -n * std::log(M_PI) - f.log_det - f.quad_form(x - mean);
}

GaussianMixture::GaussianMixture(RVec weights, std::vector<Gaussian> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (weights_.size() != static_cast<Eigen::Index>(components_.size()))
    throw std::invalid_argument("GaussianMixture: weight/component count mismatch");
  if (components_.empty()) throw std::invalid_argument("GaussianMixture: empty mixture");
  if ((weights_.array() < 0.0).any())
    throw std::invalid_argument("GaussianMixture: negative weight");
  const Eigen::Index n = components_[0].mean.size();
  for (const auto& c : components_) {
    if (c.mean.size() != n || c.cov.rows() != n || c.cov.cols() != n)
      throw std::invalid_argument("GaussianMixture: inconsistent component dimensions");
    const double scale = std::max(1.0, c.cov.cwiseAbs().maxCoeff());
    if ((c.cov - c.cov.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw std::invalid_argument("GaussianMixture: covariance not Hermitian");
  }
  rebuild_cache();
}

void GaussianMixture::rebuild_cache() {
  factors_.clear();
  factors_.reserve(components_.size());
  for (const auto& c : components_) factors_.push_back(floored_eigen_factor(c.cov));
}

double GaussianMixture::log_component_density(int k, const CVec& x) const {
  const auto& f = factors_.at(k);
  if (!f.invertible)
    throw std::domain_error("GaussianMixture: singular component covariance");
  const double n = static_cast<double>(dim());
  return -n * std::log(M_PI) - f.log_det - f.quad_form(x - components_[k].mean);
}

RVec GaussianMixture::component_log_posteriors(const CVec& x) const {
  RVec lp(size());
  for (int k = 0; k < size(); ++k) {
    lp[k] = weights_[k] > 0.0 ? std::log(weights_[k]) + log_component_density(k, x)
                              : -std::numeric_limits<double>::infinity();
  }
  return lp;
}

RVec GaussianMixture::responsibilities(const CVec& x) const {
  RVec lp = component_log_posteriors(x);
  const double m = lp.maxCoeff();
  if (!std::isfinite(m))
    throw std::runtime_error("responsibilities: every component underflowed");
  RVec r = (lp.array() - m).exp().matrix();
  for (int k = 0; k < size(); ++k)
    if (!std::isfinite(lp[k])) r[k] = 0.0;
  return r / r.sum();
}

RMat GaussianMixture::responsibilities_matrix(const CMat& columns) const {
  const Eigen::Index l = columns.cols();
  RMat lp(l, size());
  const double log_pi_term = dim() * std::log(M_PI);
  for (int k = 0; k < size(); ++k) {
    const auto& f = factors_[k];
    if (!f.invertible)
      throw std::domain_error("GaussianMixture: singular component covariance");
    CMat z = f.vectors.adjoint() * columns;
    z.colwise() -= CVec(f.vectors.adjoint() * components_[k].mean);
    const RVec inv_l = f.values.cwiseInverse();
    const RVec quad = (inv_l.transpose() * z.cwiseAbs2()).transpose();
    const double log_w =
        weights_[k] > 0.0 ? std::log(weights_[k]) : -std::numeric_limits<double>::infinity();
    lp.col(k) = (-quad.array() + (log_w - log_pi_term - f.log_det)).matrix();
  }
  for (Eigen::Index i = 0; i < l; ++i) {
    const double m = lp.row(i).maxCoeff();
    if (!std::isfinite(m))
      throw std::runtime_error("responsibilities: every component underflowed");
    RVec e = (lp.row(i).transpose().array() - m).exp().matrix();
    for (int k = 0; k < size(); ++k)
      if (!std::isfinite(lp(i, k))) e[k] = 0.0;
    lp.row(i) = e.transpose() / e.sum();
  }
  return lp;
}

double GaussianMixture::log_density(const CVec& x) const {
  RVec lp = component_log_posteriors(x);
  // Normalize the weights inside the log: subtract log sum of weights.
  return log_sum_exp(lp) - std::log(weights_.sum());
}

CVec GaussianMixture::sample(int component, Rng& rng) const {
  const auto& c = components_.at(component);
  const CMat b = factors_[component].sqrt_factor();
  CVec z(dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.cnormal();
  return c.mean + b * z;
}

Gmm::Gmm(RVec weights, std::vector<Gaussian> components, CovarianceStructure structure,
         ArrayGeometry geometry)
    : GaussianMixture(std::move(weights), std::move(components)),
      structure_(structure),
      geometry_(geometry) {
  geometry_.validate();
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("Gmm: weights must sum to one");
  if (dim() != geometry_.channel_dim())
    throw std::invalid_argument("Gmm: component dimension does not match the geometry");
  if (structure_.kind != CovarianceKind::full) {
    const int k = structure_.tx_components * structure_.rx_components;
    if (structure_.tx_components < 1 || structure_.rx_components < 1 || k != size())
      throw std::invalid_argument("Gmm: side component counts inconsistent with K");
    for (const auto& c : components_)
      if (c.mean.cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("Gmm: structured kinds require zero means");
  }
}

ObservationGmm::ObservationGmm(RVec weights, std::vector<Gaussian> components,
                               double noise_variance)
    : GaussianMixture(std::move(weights), std::move(components)),
      noise_variance_(noise_variance) {
  if (noise_variance_ < 0.0)
    throw std::invalid_argument("ObservationGmm: negative noise variance");
}

ObservationGmm adapt_to_observations(const Gmm& model, const PilotConfig& config) {
  if (model.dim() != config.observation_op.cols())
    throw std::invalid_argument("adapt_to_observations: model/config dimension mismatch");
  const CMat& a = config.observation_op;
  const CMat noise = config.noise_variance * CMat::Identity(a.rows(), a.rows());
  std::vector<Gaussian> comps;
  comps.reserve(model.size());
  for (const auto& c : model.components())
    comps.push_back({a * c.mean, hermitize(a * c.cov * a.adjoint() + noise)});
  return ObservationGmm(model.weights(), std::move(comps), config.noise_variance);
}

CVec sample_component(const Gmm& model, int component, std::uint64_t seed) {
  Rng rng(seed);
  return model.sample(component, rng);
}

std::int64_t parameter_count(const CovarianceStructure& structure, const ArrayGeometry& geometry,
                             int components) {
  geometry.validate();
  const std::int64_t n_tx = geometry.tx_total();
  const std::int64_t n_rx = geometry.rx_elements;
  const std::int64_t n = n_tx * n_rx;
  const std::int64_t k = components;
  const std::int64_t k_tx = structure.tx_components;
  const std::int64_t k_rx = structure.rx_components;
  if (k < 1) throw std::invalid_argument("parameter_count: components must be >= 1");
  if (structure.kind != CovarianceKind::full && k != k_tx * k_rx)
    throw std::invalid_argument("parameter_count: K != K_tx * K_rx");

  switch (structure.kind) {
    case CovarianceKind::full:
      return k * n * (n + 1) / 2;
    case CovarianceKind::kronecker:
      return k_rx * n_rx * (n_rx + 1) / 2 + k_tx * n_tx * (n_tx + 1) / 2;
    case CovarianceKind::toeplitz_kron:
      return 2 * k_rx * n_rx + 4 * k_tx * n_tx;
    case CovarianceKind::circulant_kron:
      return k_rx * n_rx + k_tx * n_tx;
  }
  throw std::logic_error("parameter_count: unknown covariance kind");
}

namespace {
CMat structured_axis(CovarianceKind kind, int n) {
  if (kind == CovarianceKind::toeplitz_kron) return dft_matrix(2 * n).leftCols(n);
  if (kind == CovarianceKind::circulant_kron) return dft_matrix(n);
  throw std::invalid_argument("structured_transform: kind has no transform");
}
}  // namespace

CMat structured_transform_ula(CovarianceKind kind, int n) { return structured_axis(kind, n); }

CMat structured_transform_ura(CovarianceKind kind, int n_vertical, int n_horizontal) {
  return kron(structured_axis(kind, n_vertical), structured_axis(kind, n_horizontal));
}

}  // namespace gmmfb
