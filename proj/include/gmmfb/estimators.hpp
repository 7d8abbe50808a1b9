#pragma once

#include <vector>

#include "gmmfb/gmm.hpp"
#include "gmmfb/types.hpp"

namespace gmmfb {

struct TrainStats {
  CVec mean;
  CMat cov;
};

// Sample mean and sample covariance of the vectorized training channels.
TrainStats sample_statistics(const Dataset& data);

// Conditional-mean channel estimate under the mixture model: the
// responsibility-weighted combination of per-component LMMSE estimates
// mu_k + C_k A^H (A C_k A^H + noise_var I)^{-1} (y - A mu_k).
class GmmEstimator {
 public:
  GmmEstimator(const Gmm& model, const PilotConfig& config);
  CVec estimate(const CVec& y) const;

 private:
  ObservationGmm obs_;
  std::vector<CVec> means_;   // channel-domain component means
  std::vector<CMat> gains_;   // C_k A^H (A C_k A^H + noise I)^{-1}
};

CVec estimate_gmm(const Gmm& model, const PilotConfig& config, const CVec& y);

// Classical LMMSE from global first/second moments.  A singular innovation
// covariance is eigenvalue-floored; `flagged` (optional) reports it.
CVec estimate_lmmse(const TrainStats& stats, const PilotConfig& config, const CVec& y,
                    bool* flagged = nullptr);

// Channel-domain sparse dictionary: per-axis DFT grids oversampled by the
// given factor, arranged as conj(tx atom) ⊗ rx atom so that atoms match
// vectorized rank-one wavefronts.  Columns have unit norm.
CMat build_omp_dictionary(const ArrayGeometry& geometry, int oversampling = 2);

// Orthogonal matching pursuit against A * dictionary: greedy atom selection
// by absolute normalized correlation, least-squares refit on the active set,
// stopping at `sparsity` atoms or relative residual below 1e-6.  When
// `support` is non-null it receives the selected atom indices in pick order.
CVec estimate_omp(const CMat& dictionary, const PilotConfig& config, const CVec& y,
                  int sparsity, std::vector<int>* support = nullptr);

}  // namespace gmmfb
