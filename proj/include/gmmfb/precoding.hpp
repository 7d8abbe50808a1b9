#pragma once

#include <cstdint>
#include <vector>

#include "gmmfb/gmm.hpp"

namespace gmmfb {

// What the base station knows about one user when designing precoders:
// either a directional subspace (rows span the presumed channel row space)
// or a component index to sample representative channels from.
struct UserRepresentation {
  enum class Kind { subspace, component };
  Kind kind = Kind::subspace;
  CMat subspace;       // effective channel proxy, n_eff x n_tx
  int component = -1;  // mixture component for sampled representations
};

struct PrecoderSet {
  std::vector<CMat> precoders;  // M_j, n_tx x streams
  double power_budget = 1.0;

  double total_power() const;
};

struct WmmseOptions {
  int max_iter = 300;
  double tol = 1e-6;  // relative change of the surrogate sum rate
};

struct WmmseResult {
  PrecoderSet precoders;
  std::vector<double> rate_trace;  // sum rate on the design channels per iteration
  int iterations = 0;
};

// Iterative WMMSE under a sum power constraint: alternating MMSE receivers,
// MSE weights, and the joint precoder update whose common Lagrange
// multiplier is found by bisection.  The recorded design-channel sum rate is
// non-decreasing; the returned precoders are scaled once at the end to meet
// the power budget with equality.
WmmseResult wmmse(const std::vector<CMat>& design_channels, double noise_var,
                  double power_budget, int streams, const WmmseOptions& options = {});

WmmseResult wmmse(const std::vector<UserRepresentation>& users, double noise_var,
                  double power_budget, int streams, const WmmseOptions& options = {});

// Stochastic variant for users represented by mixture components: every
// iteration draws a fresh channel per user from its component, runs the
// WMMSE receiver/weight/precoder steps on the drawn channels, and folds the
// result into a running average with weight 1/(t+1).
PrecoderSet swmmse(const Gmm& model, const std::vector<int>& components, double noise_var,
                   double power_budget, int streams, int max_iter, std::uint64_t seed);

// Downlink sum rate (bits/s/Hz) of the precoders on the true channels,
// treating inter-user interference as noise.
double sum_rate(const std::vector<CMat>& true_channels, const PrecoderSet& precoders,
                double noise_var);

}  // namespace gmmfb
