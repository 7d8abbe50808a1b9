#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmmfb/rng.hpp"
#include "gmmfb/types.hpp"

namespace gmmfb {

enum class CovarianceKind { full, kronecker, toeplitz_kron, circulant_kron };

std::string to_string(CovarianceKind kind);
CovarianceKind covariance_kind_from_string(std::string_view name);

// Covariance model of a mixture; the kron family carries the per-side
// component counts (total components = tx_components * rx_components).
struct CovarianceStructure {
  CovarianceKind kind = CovarianceKind::full;
  int tx_components = 0;
  int rx_components = 0;
};

struct Gaussian {
  CVec mean;
  CMat cov;
};

// log N_C(x; mean, cov) for the circularly-symmetric complex Gaussian:
// -N*log(pi) - log det(cov) - (x-mean)^H cov^{-1} (x-mean), evaluated on the
// eigenvalue-floored covariance.  Throws std::domain_error when the floored
// covariance is singular.
double log_gaussian_density(const CVec& x, const CVec& mean, const CMat& cov);

// Weighted Gaussian mixture over complex vectors with cached factorizations.
// Weights may be any positive vector here; responsibilities normalize
// internally (they are invariant to a common positive scaling).
class GaussianMixture {
 public:
  GaussianMixture() = default;
  GaussianMixture(RVec weights, std::vector<Gaussian> components);

  int size() const { return static_cast<int>(components_.size()); }
  int dim() const { return components_.empty() ? 0 : static_cast<int>(components_[0].mean.size()); }
  const RVec& weights() const { return weights_; }
  const std::vector<Gaussian>& components() const { return components_; }
  const Gaussian& component(int k) const { return components_.at(k); }

  double log_component_density(int k, const CVec& x) const;
  // Unnormalized component log posteriors: log w_k + log N_k(x).
  RVec component_log_posteriors(const CVec& x) const;
  // Posterior probabilities p(k | x); sums to one.  Throws std::runtime_error
  // if every component underflows to zero likelihood.
  RVec responsibilities(const CVec& x) const;
  // Batched variant over sample columns; row i holds p(. | x_i).
  RMat responsibilities_matrix(const CMat& columns) const;
  // Log of the mixture density with weights normalized to a simplex.
  double log_density(const CVec& x) const;
  // Draw from component k via the covariance square root.
  CVec sample(int component, Rng& rng) const;

 protected:
  void rebuild_cache();

  RVec weights_;
  std::vector<Gaussian> components_;
  std::vector<EigenFactor> factors_;
};

// Per-side zero-mean mixtures backing the kron covariance family.
struct SideModel {
  RVec tx_weights;
  RVec rx_weights;
  std::vector<CMat> tx_covs;
  std::vector<CMat> rx_covs;
  std::vector<RVec> tx_spectra;  // toeplitz/circulant kinds only
  std::vector<RVec> rx_spectra;
};

struct FitStage {
  std::string name;
  std::vector<double> loglik;  // training log-likelihood after each iteration
  int reinit_events = 0;
};

struct FitInfo {
  std::vector<FitStage> stages;
  int em_iters = 0;
  double final_loglik = 0.0;
};

// Channel-domain mixture model: weights on a simplex (1e-12 tolerance),
// Hermitian PSD covariances, and zero means for every structured kind.
class Gmm : public GaussianMixture {
 public:
  Gmm() = default;
  Gmm(RVec weights, std::vector<Gaussian> components, CovarianceStructure structure,
      ArrayGeometry geometry);

  const CovarianceStructure& structure() const { return structure_; }
  const ArrayGeometry& geometry() const { return geometry_; }
  const std::optional<SideModel>& side_model() const { return side_; }
  const FitInfo& fit_info() const { return fit_info_; }

  void set_side_model(SideModel side) { side_ = std::move(side); }
  void set_fit_info(FitInfo info) { fit_info_ = std::move(info); }

 private:
  CovarianceStructure structure_;
  ArrayGeometry geometry_;
  std::optional<SideModel> side_;
  FitInfo fit_info_;
};

// Observation-domain image of a channel mixture: means A*mu_k, covariances
// A C_k A^H + noise_variance * I, weights unchanged.
class ObservationGmm : public GaussianMixture {
 public:
  ObservationGmm() = default;
  ObservationGmm(RVec weights, std::vector<Gaussian> components, double noise_variance);

  double noise_variance() const { return noise_variance_; }

 private:
  double noise_variance_ = 0.0;
};

ObservationGmm adapt_to_observations(const Gmm& model, const PilotConfig& config);

struct FitOptions {
  CovarianceStructure structure;
  int components = 1;  // K; for the kron family must equal tx * rx components
  int max_iter = 50;
  double tol = 1e-5;
  std::uint64_t seed = 0;
};

// Expectation-maximization fit.  The full kind runs EM on vectorized
// channels with free means; the kron family fits zero-mean per-side mixtures
// (transmit side on matrix rows, receive side on matrix columns) and combines
// every pair via Kronecker products of the side covariances.
Gmm fit_em(const Dataset& data, const FitOptions& options);

// Number of free real covariance parameters of the fitted representation.
std::int64_t parameter_count(const CovarianceStructure& structure, const ArrayGeometry& geometry,
                             int components);

// Seeded single draw from one mixture component.
CVec sample_component(const Gmm& model, int component, std::uint64_t seed);

// Transforms D with C = D^H diag(c) D for the structured covariance kinds:
// toeplitz uses the first n columns of the 2n-point unitary DFT per axis,
// circulant the full n-point unitary DFT; the URA variant is the Kronecker
// product of the per-axis transforms (vertical-major).
CMat structured_transform_ula(CovarianceKind kind, int n);
CMat structured_transform_ura(CovarianceKind kind, int n_vertical, int n_horizontal);

}  // namespace gmmfb
