#include "gmmfb/scenario.hpp"

#include <cmath>
#include <stdexcept>

#include "gmmfb/rng.hpp"

namespace gmmfb {

void ArrayGeometry::validate() const {
  if (tx_vertical < 1 || tx_horizontal < 1 || rx_elements < 1)
    throw std::invalid_argument("ArrayGeometry: all element counts must be >= 1");
}

CVec ula_steering(int n, double angle_rad) {
  CVec a(n);
  const double k = M_PI * std::sin(angle_rad);
  for (int r = 0; r < n; ++r) a[r] = cd(std::cos(k * r), std::sin(k * r));
  return a;
}

CVec ura_steering(const ArrayGeometry& geometry, double azimuth_rad, double elevation_rad) {
  geometry.validate();
  const int nv = geometry.tx_vertical;
  const int nh = geometry.tx_horizontal;
  CVec av(nv), ah(nh);
  const double kv = M_PI * std::sin(elevation_rad);
  const double kh = M_PI * std::cos(elevation_rad) * std::sin(azimuth_rad);
  for (int m = 0; m < nv; ++m) av[m] = cd(std::cos(kv * m), std::sin(kv * m));
  for (int m = 0; m < nh; ++m) ah[m] = cd(std::cos(kh * m), std::sin(kh * m));
  CVec a(nv * nh);
  for (int v = 0; v < nv; ++v)
    for (int h = 0; h < nh; ++h) a[v * nh + h] = av[v] * ah[h];
  return a;
}

namespace {

CMat draw_channel(const ArrayGeometry& geometry, int path_count, double spread_rad, Rng& rng) {
  const int n_rx = geometry.rx_elements;
  const int n_tx = geometry.tx_total();
  CMat h = CMat::Zero(n_rx, n_tx);

  // Per-sample mean directions; paths scatter around them.
  const double mean_az = rng.uniform(-M_PI, M_PI);
  const double mean_el = rng.uniform(-0.5 * M_PI, 0.5 * M_PI);
  const double mean_rx = rng.uniform(-M_PI, M_PI);
  const double gain_std = 1.0 / std::sqrt(static_cast<double>(path_count));

  for (int p = 0; p < path_count; ++p) {
    const cd gain = gain_std * rng.cnormal();
    const double az = mean_az + rng.laplace(spread_rad);
    const double el = mean_el + rng.laplace(spread_rad);
    const double rx_angle = mean_rx + rng.laplace(spread_rad);
    const CVec a_tx = ura_steering(geometry, az, el);
    const CVec a_rx = ula_steering(n_rx, rx_angle);
    h.noalias() += gain * a_rx * a_tx.adjoint();
  }
  return h;
}

}  // namespace

Dataset generate_dataset(const ArrayGeometry& geometry, int count, int path_count,
                         double angle_spread_deg, std::uint64_t seed) {
  geometry.validate();
  if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
  if (path_count < 1) throw std::invalid_argument("generate_dataset: path_count must be >= 1");
  if (angle_spread_deg < 0.0)
    throw std::invalid_argument("generate_dataset: angle spread must be >= 0");

  const double spread_rad = angle_spread_deg * M_PI / 180.0;
  Dataset data;
  data.geometry = geometry;
  data.seed = seed;
  data.samples.resize(count);

  double energy = 0.0;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    data.samples[i].matrix = draw_channel(geometry, path_count, spread_rad, rng);
    energy += data.samples[i].matrix.squaredNorm();
  }

  // One global scale: empirical mean of ||h||^2 becomes the channel dimension.
  const double mean_energy = energy / count;
  if (mean_energy <= 0.0) throw std::runtime_error("generate_dataset: degenerate sample energy");
  const double scale = std::sqrt(geometry.channel_dim() / mean_energy);
  for (auto& s : data.samples) s.matrix *= scale;
  data.normalization_scale = scale;
  return data;
}

PilotConfig build_pilot_config(const ArrayGeometry& geometry, int n_p, double snr_db,
                               double power_budget) {
  geometry.validate();
  const int n_tx = geometry.tx_total();
  const int n_rx = geometry.rx_elements;
  if (n_p < 1 || n_p > n_tx)
    throw std::invalid_argument("build_pilot_config: n_p must be in [1, n_tx]");
  if (power_budget <= 0.0)
    throw std::invalid_argument("build_pilot_config: power budget must be positive");

  PilotConfig config;
  config.geometry = geometry;
  config.n_p = n_p;
  config.snr_db = snr_db;
  config.power_budget = power_budget;
  config.noise_variance = power_budget * std::pow(10.0, -snr_db / 10.0);

  // First n_p columns (vertical-major order) of the unitary 2D-DFT, scaled to
  // pilot power: distinct columns stay exactly orthogonal.
  const CMat f2d = kron(dft_matrix(geometry.tx_vertical), dft_matrix(geometry.tx_horizontal));
  config.pilots = std::sqrt(power_budget) * f2d.leftCols(n_p);

  // vec(H P) = (P^T ⊗ I) vec(H).
  config.observation_op = kron(config.pilots.transpose(), CMat::Identity(n_rx, n_rx));
  return config;
}

CVec observe(const ChannelSample& channel, const PilotConfig& config, std::uint64_t seed) {
  if (channel.matrix.rows() != config.geometry.rx_elements ||
      channel.matrix.cols() != config.geometry.tx_total())
    throw std::invalid_argument("observe: channel dimensions do not match the pilot config");
  Rng rng(seed);
  CVec y = config.observation_op * channel.vectorized();
  const double noise_std = std::sqrt(config.noise_variance);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += noise_std * rng.cnormal();
  return y;
}

}  // namespace gmmfb
