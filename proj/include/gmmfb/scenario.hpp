#pragma once

#include <cstdint>

#include "gmmfb/types.hpp"

namespace gmmfb {

// Steering vector of an n-element half-wavelength ULA: a[r] = exp(i*pi*r*sin(angle)).
CVec ula_steering(int n, double angle_rad);

// Steering vector of the half-wavelength URA, vertical-major element order:
// a = a_vertical(elevation) ⊗ a_horizontal(azimuth, elevation).
CVec ura_steering(const ArrayGeometry& geometry, double azimuth_rad, double elevation_rad);

// Draws `count` geometric multipath channels: each sample superimposes
// `path_count` planar wavefronts with complex normal gains whose angles are
// Laplace-distributed around a per-sample mean direction.  The finished set
// is scaled once so the empirical mean of ||h||^2 equals the channel
// dimension.  Sample i depends only on (seed, i), so generation order does
// not matter.
Dataset generate_dataset(const ArrayGeometry& geometry, int count, int path_count,
                         double angle_spread_deg, std::uint64_t seed);

// Orthogonal pilots: the first n_p columns (vertical-major order) of the
// unitary 2D-DFT matched to the transmit array, scaled to squared norm
// `power_budget`; noise variance follows from the SNR definition
// power_budget / noise_variance.
PilotConfig build_pilot_config(const ArrayGeometry& geometry, int n_p, double snr_db,
                               double power_budget = 1.0);

// y = A h + n with n ~ CN(0, noise_variance * I); the noise realization
// depends only on the seed, never on the channel.
CVec observe(const ChannelSample& channel, const PilotConfig& config, std::uint64_t seed);

}  // namespace gmmfb
