#pragma once

#include <cstdint>
#include <vector>

#include "gmmfb/gmm.hpp"
#include "gmmfb/types.hpp"

namespace gmmfb {

// Achievable spectral efficiency log2 det(I + (1/noise_var) H Q H^H) in
// bits/s/Hz.  Rejects transmit covariances that are not Hermitian PSD.
double spectral_efficiency(const CMat& channel, const CMat& tx_cov, double noise_var);

struct WaterFillingResult {
  CMat q_opt;        // capacity-achieving transmit covariance, trace = power_budget
  double rate = 0.0; // in bits/s/Hz
  bool degenerate = false;  // all-zero channel; q_opt falls back to scaled identity
};

// Capacity oracle for a fixed channel under the transmit power budget.
WaterFillingResult water_filling(const CMat& channel, double noise_var, double power_budget);

struct ClusterPartition {
  std::vector<int> assignments;    // per sample, in [0, K)
  std::vector<int> cluster_sizes;  // length K
};

// Hard assignment of training samples to mixture components by maximum
// responsibility (ties resolved toward the smallest component index).
ClusterPartition cluster_by_responsibility(const Gmm& model, const Dataset& data);

struct PgaSettings {
  int max_iter = 200;
  double tol = 1e-6;          // relative objective change
  double init_step = 1.0;
  double backtrack = 0.5;
  int max_backtracks = 30;
  double armijo_c = 1e-4;
};

struct PgaResult {
  CMat q;                         // Hermitian PSD, trace <= power_budget + 1e-9
  std::vector<double> objective;  // average rate after each accepted ascent step
  bool empty_cluster = false;     // no members: q is left empty (codebook
                                  // construction substitutes the scaled identity)
};

// Projected gradient ascent on the cluster-average spectral efficiency,
// starting from (power_budget/n_tx) I, Armijo backtracking line search, and
// projection onto {Q ⪰ 0, tr(Q) <= power_budget} by eigenvalue clipping plus
// a KKT water-level shift.
PgaResult optimize_entry(const std::vector<const CMat*>& cluster_channels, double noise_var,
                         double power_budget, const PgaSettings& settings = {});

// Euclidean projection onto the PSD trace ball (Hermitian part taken first).
CMat project_psd_trace(const CMat& m, double power_budget);

struct Codebook {
  std::vector<CMat> entries;      // Q_k (n_tx x n_tx); empty for random codebooks
  std::vector<CMat> directional;  // X_k (n_tx x n_rx), orthonormal columns
  double power_budget = 1.0;
  int n_tx = 0;
  int n_rx = 0;

  int size() const { return static_cast<int>(directional.size()); }
};

// One codebook entry per mixture component, optimized on the component's
// responsibility cluster; directional factors are the top-n_rx eigenvectors
// of each entry.
Codebook build_codebook(const Gmm& model, const Dataset& data, double noise_var,
                        double power_budget, const PgaSettings& settings = {});

// Keeps entries at the given (ascending) indices; companion of prune_gmm.
Codebook discard_entries(const Codebook& codebook, const std::vector<int>& kept_indices);

// Baseline: k-means (k-means++ seeding, Euclidean metric on vectorized
// channels) partitions the data, then the same per-cluster entry optimizer.
Codebook lloyd_codebook(const Dataset& data, int entries, double noise_var,
                        double power_budget, std::uint64_t seed, const PgaSettings& settings = {},
                        int max_kmeans_iter = 100);

// Baseline: Haar-random orthonormal directional factors (no entries).
Codebook random_codebook(int entries, const ArrayGeometry& geometry, double power_budget,
                         std::uint64_t seed);

// Runtime entry pickers used by the baseline feedback schemes.
int select_entry_by_rate(const Codebook& codebook, const CMat& channel_estimate,
                         double noise_var);
int select_entry_by_subspace(const Codebook& codebook, const CMat& channel_estimate);

}  // namespace gmmfb
