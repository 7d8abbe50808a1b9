#include "gmmfb/precoding.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gmmfb/rng.hpp"

namespace gmmfb {
namespace {

double log_det_pd(const CMat& m) {
  Eigen::LLT<CMat> llt(hermitize(m));
  if (llt.info() == Eigen::Success) {
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      log_det += 2.0 * std::log(std::real(llt.matrixLLT()(i, i)));
    return log_det;
  }
  return floored_eigen_factor(m).log_det;
}

// Sum rate treating inter-user interference as noise, evaluated on `channels`.
double rate_of(const std::vector<CMat>& channels, const std::vector<CMat>& m,
               double noise_var) {
  const double ln2 = std::log(2.0);
  double rate = 0.0;
  for (std::size_t j = 0; j < channels.size(); ++j) {
    const CMat& h = channels[j];
    CMat total = noise_var * CMat::Identity(h.rows(), h.rows());
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const CMat hm = h * m[i];
      total.noalias() += hm * hm.adjoint();
    }
    const CMat hm_j = h * m[j];
    const CMat interf = total - hm_j * hm_j.adjoint();
    rate += (log_det_pd(total) - log_det_pd(interf)) / ln2;
  }
  return rate;
}

// Joint precoder update: M_j = (S + mu I)^{-1} H_j^H U_j W_j with the common
// multiplier mu >= 0 picked by bisection on the sum-power constraint.
std::vector<CMat> precoder_step(const std::vector<CMat>& channels,
                                const std::vector<CMat>& u, const std::vector<CMat>& w,
                                double power_budget) {
  const Eigen::Index n_tx = channels[0].cols();
  CMat s = CMat::Zero(n_tx, n_tx);
  std::vector<CMat> b(channels.size());
  for (std::size_t j = 0; j < channels.size(); ++j) {
    const CMat hu = channels[j].adjoint() * u[j];
    s.noalias() += hu * w[j] * hu.adjoint();
    b[j] = hu * w[j];
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(s));
  const RVec lam = es.eigenvalues().cwiseMax(0.0);
  std::vector<CMat> g(channels.size());
  for (std::size_t j = 0; j < channels.size(); ++j) g[j] = es.eigenvectors().adjoint() * b[j];

  auto power_at = [&](double mu) {
    double p = 0.0;
    for (const CMat& gj : g)
      for (Eigen::Index r = 0; r < gj.rows(); ++r) {
        const double denom = lam[r] + mu;
        if (denom <= 0.0) return std::numeric_limits<double>::infinity();
        p += gj.row(r).squaredNorm() / (denom * denom);
      }
    return p;
  };

  double mu = 0.0;
  if (!(lam.minCoeff() > 0.0) || power_at(0.0) > power_budget) {
    double hi = 1e-12;
    while (power_at(hi) > power_budget) {
      hi *= 4.0;
      if (hi > 1e30) break;
    }
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
      mu = 0.5 * (lo + hi);
      if (power_at(mu) > power_budget)
        lo = mu;
      else
        hi = mu;
    }
    mu = hi;  // feasible side of the bracket
  }

  std::vector<CMat> m(channels.size());
  for (std::size_t j = 0; j < channels.size(); ++j) {
    CMat scaled = g[j];
    for (Eigen::Index r = 0; r < scaled.rows(); ++r) scaled.row(r) /= (lam[r] + mu);
    m[j] = es.eigenvectors() * scaled;
  }
  return m;
}

// MMSE receivers and weights for the current precoders on `channels`.
void receiver_step(const std::vector<CMat>& channels, const std::vector<CMat>& m,
                   double noise_var, std::vector<CMat>& u, std::vector<CMat>& w) {
  const std::size_t users = channels.size();
  for (std::size_t j = 0; j < users; ++j) {
    const CMat& h = channels[j];
    CMat cov = noise_var * CMat::Identity(h.rows(), h.rows());
    for (std::size_t i = 0; i < users; ++i) {
      const CMat hm = h * m[i];
      cov.noalias() += hm * hm.adjoint();
    }
    const CMat hm_j = h * m[j];
    u[j] = hermitize(cov).llt().solve(hm_j);
    const CMat e = hermitize(CMat::Identity(m[j].cols(), m[j].cols()) - u[j].adjoint() * hm_j);
    w[j] = hermitize(e.llt().solve(CMat::Identity(e.rows(), e.cols())));
  }
}

std::vector<CMat> init_precoders(const std::vector<CMat>& channels, int streams,
                                 double power_budget) {
  const Eigen::Index n_tx = channels[0].cols();
  std::vector<CMat> m(channels.size());
  double power = 0.0;
  for (std::size_t j = 0; j < channels.size(); ++j) {
    CMat mf = channels[j].adjoint().leftCols(streams);
    if (mf.norm() <= 1e-300) mf = CMat::Identity(n_tx, streams);
    m[j] = mf;
    power += mf.squaredNorm();
  }
  const double scale = std::sqrt(power_budget / power);
  for (auto& mj : m) mj *= scale;
  return m;
}

void validate_allocation(const std::vector<CMat>& channels, int streams, double noise_var,
                         double power_budget) {
  if (channels.empty()) throw std::invalid_argument("precoding: no users");
  if (streams < 1) throw std::invalid_argument("precoding: streams must be >= 1");
  if (noise_var <= 0.0 || power_budget <= 0.0)
    throw std::invalid_argument("precoding: noise variance and power must be positive");
  const Eigen::Index n_tx = channels[0].cols();
  Eigen::Index total = 0;
  for (const CMat& h : channels) {
    if (h.cols() != n_tx) throw std::invalid_argument("precoding: inconsistent tx dimension");
    if (streams > h.rows())
      throw std::invalid_argument("precoding: streams exceed the user representation rank");
    total += streams;
  }
  if (total > n_tx)
    throw std::invalid_argument("precoding: total streams exceed transmit antennas");
}

}  // namespace

double PrecoderSet::total_power() const {
  double p = 0.0;
  for (const auto& m : precoders) p += m.squaredNorm();
  return p;
}

WmmseResult wmmse(const std::vector<CMat>& design_channels, double noise_var,
                  double power_budget, int streams, const WmmseOptions& options) {
  validate_allocation(design_channels, streams, noise_var, power_budget);
  const std::size_t users = design_channels.size();

  std::vector<CMat> m = init_precoders(design_channels, streams, power_budget);
  std::vector<CMat> u(users), w(users);

  WmmseResult out;
  double prev = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iter; ++iter) {
    receiver_step(design_channels, m, noise_var, u, w);
    m = precoder_step(design_channels, u, w, power_budget);
    const double rate = rate_of(design_channels, m, noise_var);
    out.rate_trace.push_back(rate);
    out.iterations = iter + 1;
    if (iter > 0 && std::abs(rate - prev) < options.tol * std::max(std::abs(prev), 1e-12)) break;
    prev = rate;
  }

  // Equality-normalize the returned precoders (the trace itself is recorded
  // before normalization so monotonicity is untouched).
  const double power = [&] {
    double p = 0.0;
    for (const auto& mj : m) p += mj.squaredNorm();
    return p;
  }();
  const double scale = std::sqrt(power_budget / power);
  for (auto& mj : m) mj *= scale;

  out.precoders.precoders = std::move(m);
  out.precoders.power_budget = power_budget;
  return out;
}

WmmseResult wmmse(const std::vector<UserRepresentation>& users, double noise_var,
                  double power_budget, int streams, const WmmseOptions& options) {
  std::vector<CMat> channels;
  channels.reserve(users.size());
  for (const auto& u : users) {
    if (u.kind != UserRepresentation::Kind::subspace)
      throw std::invalid_argument("wmmse: every user must carry a subspace representation");
    channels.push_back(u.subspace);
  }
  return wmmse(channels, noise_var, power_budget, streams, options);
}

PrecoderSet swmmse(const Gmm& model, const std::vector<int>& components, double noise_var,
                   double power_budget, int streams, int max_iter, std::uint64_t seed) {
  if (components.empty()) throw std::invalid_argument("swmmse: no users");
  if (max_iter < 1) throw std::invalid_argument("swmmse: max_iter must be >= 1");
  for (int k : components)
    if (k < 0 || k >= model.size())
      throw std::invalid_argument("swmmse: component index out of range");

  const int n_rx = model.geometry().rx_elements;
  const int n_tx = model.geometry().tx_total();
  const std::size_t users = components.size();
  Rng rng(derive_seed(seed, 0x73776d6dULL));

  auto draw_channels = [&]() {
    std::vector<CMat> h(users);
    for (std::size_t j = 0; j < users; ++j) {
      const CVec v = model.sample(components[j], rng);
      h[j] = Eigen::Map<const CMat>(v.data(), n_rx, n_tx);
    }
    return h;
  };

  std::vector<CMat> first = draw_channels();
  validate_allocation(first, streams, noise_var, power_budget);
  std::vector<CMat> m = init_precoders(first, streams, power_budget);
  std::vector<CMat> u(users), w(users);

  for (int t = 1; t <= max_iter; ++t) {
    const std::vector<CMat> h = t == 1 ? std::move(first) : draw_channels();
    receiver_step(h, m, noise_var, u, w);
    const std::vector<CMat> m_hat = precoder_step(h, u, w, power_budget);
    const double gamma = 1.0 / (t + 1.0);
    for (std::size_t j = 0; j < users; ++j) m[j] = (1.0 - gamma) * m[j] + gamma * m_hat[j];
  }

  double power = 0.0;
  for (const auto& mj : m) power += mj.squaredNorm();
  const double scale = std::sqrt(power_budget / power);
  for (auto& mj : m) mj *= scale;

  PrecoderSet out;
  out.precoders = std::move(m);
  out.power_budget = power_budget;
  return out;
}

double sum_rate(const std::vector<CMat>& true_channels, const PrecoderSet& precoders,
                double noise_var) {
  if (noise_var <= 0.0) throw std::invalid_argument("sum_rate: noise variance must be positive");
  if (true_channels.size() != precoders.precoders.size())
    throw std::invalid_argument("sum_rate: channel/precoder count mismatch");
  return rate_of(true_channels, precoders.precoders, noise_var);
}

}  // namespace gmmfb
