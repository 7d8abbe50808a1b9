#pragma once

#include <cstdint>
#include <vector>

#include "gmmfb/linalg.hpp"

namespace gmmfb {

// Uniform rectangular transmit array (vertical x horizontal, half-wavelength
// spacing) paired with a uniform linear receive array.
struct ArrayGeometry {
  int tx_vertical = 1;
  int tx_horizontal = 1;
  int rx_elements = 1;

  int tx_total() const { return tx_vertical * tx_horizontal; }
  int channel_dim() const { return tx_total() * rx_elements; }
  void validate() const;

  bool operator==(const ArrayGeometry&) const = default;
};

// One MIMO channel realization.  The vectorized view stacks the matrix
// column by column: vectorized[i + j*n_rx] == matrix(i, j).
struct ChannelSample {
  CMat matrix;  // n_rx x n_tx

  CVec vectorized() const {
    return Eigen::Map<const CVec>(matrix.data(), matrix.size());
  }
};

// A set of channel realizations drawn from one propagation scenario,
// globally normalized so that mean ||h||^2 equals the channel dimension.
struct Dataset {
  std::vector<ChannelSample> samples;
  ArrayGeometry geometry;
  double normalization_scale = 1.0;
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(samples.size()); }
};

// Pilot phase description: orthogonal pilot matrix, the induced linear
// observation operator acting on vectorized channels, and the noise level.
struct PilotConfig {
  ArrayGeometry geometry;
  int n_p = 0;
  double snr_db = 0.0;
  double power_budget = 1.0;
  double noise_variance = 1.0;
  CMat pilots;           // n_tx x n_p, columns with squared norm = power_budget
  CMat observation_op;   // (n_rx*n_p) x (n_rx*n_tx)

  int obs_dim() const { return geometry.rx_elements * n_p; }
};

}  // namespace gmmfb
