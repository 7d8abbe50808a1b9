#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gmmfb/codebook.hpp"
#include "gmmfb/gmm.hpp"

namespace gmmfb {

struct ScenarioConfig {
  int tx_v = 4;
  int tx_h = 4;
  int n_rx = 4;
  int train_count = 5000;
  int eval_count = 2000;
  int paths = 3;
  double spread_deg = 5.0;
  std::uint64_t train_seed = 101;
  std::uint64_t eval_seed = 202;

  ArrayGeometry geometry() const { return {tx_v, tx_h, n_rx}; }
};

struct GmmConfig {
  std::string structure = "kronecker";
  int k = 64;
  int k_tx = 16;
  int k_rx = 4;
  int max_iter = 40;
  double tol = 1e-5;
  std::uint64_t seed = 303;
};

struct ReductionConfig {
  std::string method = "merge";  // "merge" | "prune" | "none"
  int target_bits = -1;          // -1 keeps the fitted component count
};

struct MultiUserConfig {
  int users = 4;
  int constellations = 2500;
  int streams = 1;
  int wmmse_max_iter = 300;
  int swmmse_max_iter = 300;
  std::uint64_t seed = 404;
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  GmmConfig gmm;
  ReductionConfig reduction;
  PgaSettings pga;
  MultiUserConfig mu;
  std::vector<int> n_p{4, 8};
  std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0};
  std::vector<std::string> methods;  // empty selects the mode's default set
  double power_budget = 1.0;
  std::uint64_t trial_seed = 606;
  std::uint64_t lloyd_seed = 505;
  std::uint64_t random_seed = 707;
  int lloyd_max_iter = 100;
  int omp_sparsity = 3;
  int omp_oversampling = 2;
};

// Parse/serialize the JSON experiment description (strict: unknown keys are
// rejected so config typos cannot silently fall back to defaults).
ExperimentConfig experiment_config_from_json_text(const std::string& text);
std::string experiment_config_to_json_text(const ExperimentConfig& config);

struct EvalRecord {
  int trial_id = 0;
  std::string method;
  double snr_db = 0.0;
  int n_p = 0;
  int bits = 0;       // feedback bits of the scheme
  double value = 0.0; // normalized spectral efficiency (p2p) or sum rate (mu)
};

// Point-to-point campaign: for every (snr, n_p) cell and every method,
// feedback picks a codebook entry per evaluation channel and the record value
// is the normalized spectral efficiency r(H, Q) / r_wf(H) in [0, 1].
std::vector<EvalRecord> eval_p2p(const ExperimentConfig& config);

// Multi-user campaign: constellations of `users` channels drawn from the
// evaluation set; each method maps feedback to user representations and a
// precoder design; the record value is the sum rate on the true channels.
std::vector<EvalRecord> eval_mu(const ExperimentConfig& config);

// Complementary CDF P(value > threshold) on the given thresholds.
std::vector<std::pair<double, double>> ccdf(const std::vector<double>& values,
                                            const std::vector<double>& grid);
std::vector<double> default_ccdf_grid(const std::vector<double>& values, int points = 200);

// Deterministic text artifacts (stable key order and float formatting).
std::string records_to_csv(const std::vector<EvalRecord>& records);
std::string summarize_records(const std::vector<EvalRecord>& records, int ccdf_points = 200);

}  // namespace gmmfb
