#include "gmmfb/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gmmfb/rng.hpp"
#include "kmeans.hpp"

namespace gmmfb {
namespace {

// log2 det(I + (1/nv) H Q H^H) without input validation; Q is trusted PSD.
double rate_unchecked(const CMat& h, const CMat& q, double noise_var) {
  CMat m = CMat::Identity(h.rows(), h.rows()) + (h * q * h.adjoint()) / noise_var;
  m = hermitize(m);
  Eigen::LLT<CMat> llt(m);
  if (llt.info() == Eigen::Success) {
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      log_det += 2.0 * std::log(std::real(llt.matrixLLT()(i, i)));
    return log_det / std::log(2.0);
  }
  // Rounding pushed an eigenvalue a hair below zero; the floored path is exact
  // enough here because the spectrum of M is bounded below by ~1.
  return floored_eigen_factor(m).log_det / std::log(2.0);
}

double mean_rate(const std::vector<const CMat*>& channels, const CMat& q, double noise_var) {
  double sum = 0.0;
  for (const CMat* h : channels) sum += rate_unchecked(*h, q, noise_var);
  return sum / static_cast<double>(channels.size());
}

// Ascent direction of the cluster-average rate at Q.
CMat mean_rate_gradient(const std::vector<const CMat*>& channels, const CMat& q,
                        double noise_var) {
  const Eigen::Index n_tx = q.rows();
  CMat g = CMat::Zero(n_tx, n_tx);
  const double scale = 1.0 / (noise_var * std::log(2.0) * channels.size());
  for (const CMat* hp : channels) {
    const CMat& h = *hp;
    CMat m = hermitize(CMat::Identity(h.rows(), h.rows()) + (h * q * h.adjoint()) / noise_var);
    g.noalias() += scale * (h.adjoint() * m.ldlt().solve(h));
  }
  return hermitize(g);
}

// Simplex-style water-level shift: theta >= 0 with sum max(v - theta, 0) = budget.
RVec water_level_shift(const RVec& v, double budget) {
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double acc = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    acc += sorted[i];
    const double t = (acc - budget) / static_cast<double>(i + 1);
    if (t < sorted[i]) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

}  // namespace

double spectral_efficiency(const CMat& channel, const CMat& tx_cov, double noise_var) {
  if (noise_var <= 0.0)
    throw std::invalid_argument("spectral_efficiency: noise variance must be positive");
  if (tx_cov.rows() != tx_cov.cols() || channel.cols() != tx_cov.rows())
    throw std::invalid_argument("spectral_efficiency: dimension mismatch");
  const double scale = std::max(1.0, tx_cov.cwiseAbs().maxCoeff());
  if ((tx_cov - tx_cov.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("spectral_efficiency: transmit covariance not Hermitian");
  // Cheap PSD gate: Q + delta I must admit a Cholesky factorization.
  const double delta = 1e-8 * std::max(1.0, std::real(tx_cov.trace()));
  Eigen::LLT<CMat> gate(hermitize(tx_cov) + delta * CMat::Identity(tx_cov.rows(), tx_cov.cols()));
  if (gate.info() != Eigen::Success)
    throw std::invalid_argument("spectral_efficiency: transmit covariance not PSD");
  return rate_unchecked(channel, tx_cov, noise_var);
}

WaterFillingResult water_filling(const CMat& channel, double noise_var, double power_budget) {
  if (noise_var <= 0.0 || power_budget <= 0.0)
    throw std::invalid_argument("water_filling: noise variance and power must be positive");
  const Eigen::Index n_tx = channel.cols();
  WaterFillingResult out;

  Eigen::JacobiSVD<CMat> svd(channel, Eigen::ComputeThinV);
  const RVec s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  if (smax <= 1e-14) {
    out.q_opt = (power_budget / static_cast<double>(n_tx)) * CMat::Identity(n_tx, n_tx);
    out.rate = 0.0;
    out.degenerate = true;
    return out;
  }

  // Channel-mode gains; modes below numerical rank carry no power.
  std::vector<double> gains;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > 1e-14 * smax) gains.push_back(s[i] * s[i] / noise_var);
  const int modes = static_cast<int>(gains.size());

  // Water level over the strongest m modes (gains are already descending).
  double level = 0.0;
  int active = 1;
  double inv_sum = 0.0;
  for (int m = 1; m <= modes; ++m) {
    inv_sum += 1.0 / gains[m - 1];
    const double cand = (power_budget + inv_sum) / m;
    if (cand > 1.0 / gains[m - 1]) {
      level = cand;
      active = m;
    }
  }

  RVec powers = RVec::Zero(s.size());
  double rate = 0.0;
  for (int i = 0; i < active; ++i) {
    powers[i] = level - 1.0 / gains[i];
    rate += std::log2(1.0 + gains[i] * powers[i]);
  }
  out.q_opt = hermitize(svd.matrixV() * powers.cast<cd>().asDiagonal() * svd.matrixV().adjoint());
  out.rate = rate;
  out.degenerate = false;
  return out;
}

ClusterPartition cluster_by_responsibility(const Gmm& model, const Dataset& data) {
  if (model.dim() != data.geometry.channel_dim())
    throw std::invalid_argument("cluster_by_responsibility: model/data dimension mismatch");
  CMat x(model.dim(), data.count());
  for (int i = 0; i < data.count(); ++i) x.col(i) = data.samples[i].vectorized();
  const RMat resp = model.responsibilities_matrix(x);

  ClusterPartition part;
  part.assignments.resize(data.count());
  part.cluster_sizes.assign(model.size(), 0);
  for (int i = 0; i < data.count(); ++i) {
    int arg = 0;
    double best = resp(i, 0);
    for (int k = 1; k < model.size(); ++k) {
      if (resp(i, k) > best) {  // strict: ties keep the smallest index
        best = resp(i, k);
        arg = k;
      }
    }
    part.assignments[i] = arg;
    part.cluster_sizes[arg] += 1;
  }
  return part;
}

CMat project_psd_trace(const CMat& m, double power_budget) {
  if (power_budget <= 0.0)
    throw std::invalid_argument("project_psd_trace: power budget must be positive");
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(m));
  RVec lam = es.eigenvalues().cwiseMax(0.0);
  if (lam.sum() > power_budget) lam = water_level_shift(lam, power_budget);
  return hermitize(es.eigenvectors() * lam.cast<cd>().asDiagonal() * es.eigenvectors().adjoint());
}

PgaResult optimize_entry(const std::vector<const CMat*>& cluster_channels, double noise_var,
                         double power_budget, const PgaSettings& settings) {
  if (noise_var <= 0.0 || power_budget <= 0.0)
    throw std::invalid_argument("optimize_entry: noise variance and power must be positive");

  PgaResult out;
  if (cluster_channels.empty()) {
    // Nothing to optimize against; fall back to isotropic transmission.
    out.empty_cluster = true;
    out.q = CMat();
    return out;
  }
  const Eigen::Index n_tx = cluster_channels.front()->cols();
  for (const CMat* h : cluster_channels)
    if (h->cols() != n_tx)
      throw std::invalid_argument("optimize_entry: inconsistent channel dimensions");

  CMat q = (power_budget / static_cast<double>(n_tx)) * CMat::Identity(n_tx, n_tx);
  double f = mean_rate(cluster_channels, q, noise_var);
  out.objective.push_back(f);

  for (int iter = 0; iter < settings.max_iter; ++iter) {
    const CMat g = mean_rate_gradient(cluster_channels, q, noise_var);
    double step = settings.init_step;
    bool accepted = false;
    for (int bt = 0; bt <= settings.max_backtracks; ++bt) {
      const CMat cand = project_psd_trace(q + step * g, power_budget);
      const double fc = mean_rate(cluster_channels, cand, noise_var);
      const double expected = std::real((g.adjoint() * (cand - q)).trace());
      const bool armijo_ok = expected > 0.0
                                 ? fc >= f + settings.armijo_c * expected
                                 : fc >= f;
      if (armijo_ok) {
        const double rel = (fc - f) / std::max(std::abs(f), 1e-12);
        q = cand;
        f = fc;
        out.objective.push_back(f);
        accepted = true;
        if (rel < settings.tol) iter = settings.max_iter;  // converged
        break;
      }
      step *= settings.backtrack;
    }
    if (!accepted) break;  // no admissible step remains
  }
  out.q = q;
  return out;
}

namespace {

// Top-n_rx eigenvectors (descending eigenvalues) of a Hermitian PSD entry.
CMat directional_factor(const CMat& q, int n_rx) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(q));
  const Eigen::Index n = q.rows();
  CMat x(n, n_rx);
  for (int j = 0; j < n_rx; ++j) x.col(j) = es.eigenvectors().col(n - 1 - j);
  return x;
}

Codebook entries_from_clusters(const Dataset& data, const std::vector<int>& assignments,
                               int entries, double noise_var, double power_budget,
                               const PgaSettings& settings) {
  const int n_tx = data.geometry.tx_total();
  const int n_rx = data.geometry.rx_elements;
  if (n_rx > n_tx)
    throw std::invalid_argument("codebook: needs n_rx <= n_tx for directional factors");

  Codebook cb;
  cb.power_budget = power_budget;
  cb.n_tx = n_tx;
  cb.n_rx = n_rx;
  cb.entries.reserve(entries);
  cb.directional.reserve(entries);
  for (int k = 0; k < entries; ++k) {
    std::vector<const CMat*> cluster;
    for (int i = 0; i < data.count(); ++i)
      if (assignments[i] == k) cluster.push_back(&data.samples[i].matrix);
    PgaResult res = optimize_entry(cluster, noise_var, power_budget, settings);
    if (res.empty_cluster)
      res.q = (power_budget / n_tx) * CMat::Identity(n_tx, n_tx);
    cb.directional.push_back(directional_factor(res.q, n_rx));
    cb.entries.push_back(std::move(res.q));
  }
  return cb;
}

}  // namespace

Codebook build_codebook(const Gmm& model, const Dataset& data, double noise_var,
                        double power_budget, const PgaSettings& settings) {
  const ClusterPartition part = cluster_by_responsibility(model, data);
  return entries_from_clusters(data, part.assignments, model.size(), noise_var, power_budget,
                               settings);
}

Codebook discard_entries(const Codebook& codebook, const std::vector<int>& kept_indices) {
  Codebook out;
  out.power_budget = codebook.power_budget;
  out.n_tx = codebook.n_tx;
  out.n_rx = codebook.n_rx;
  for (int idx : kept_indices) {
    if (idx < 0 || idx >= codebook.size())
      throw std::invalid_argument("discard_entries: index out of range");
    if (!codebook.entries.empty()) out.entries.push_back(codebook.entries[idx]);
    out.directional.push_back(codebook.directional[idx]);
  }
  return out;
}

Codebook lloyd_codebook(const Dataset& data, int entries, double noise_var, double power_budget,
                        std::uint64_t seed, const PgaSettings& settings, int max_kmeans_iter) {
  if (entries < 1 || entries > data.count())
    throw std::invalid_argument("lloyd_codebook: entries must be in [1, sample count]");
  const int n = data.geometry.channel_dim();
  CMat x(n, data.count());
  for (int i = 0; i < data.count(); ++i) x.col(i) = data.samples[i].vectorized();

  Rng rng(derive_seed(seed, 0x6c6c6f79ULL));
  const std::vector<int> seeds = detail::kmeanspp_seeds(x, entries, rng);
  CMat centroids(n, entries);
  for (int j = 0; j < entries; ++j) centroids.col(j) = x.col(seeds[j]);

  std::vector<int> assign(data.count(), -1);
  for (int iter = 0; iter < max_kmeans_iter; ++iter) {
    std::vector<int> next = detail::nearest_assignment(x, centroids);

    // Re-seed empty clusters to the sample farthest from its centroid.
    std::vector<int> counts(entries, 0);
    for (int a : next) counts[a] += 1;
    for (int j = 0; j < entries; ++j) {
      if (counts[j] > 0) continue;
      double worst = -1.0;
      int pick = 0;
      for (int i = 0; i < data.count(); ++i) {
        const double d = (x.col(i) - centroids.col(next[i])).squaredNorm();
        if (d > worst && counts[next[i]] > 1) {
          worst = d;
          pick = i;
        }
      }
      counts[next[pick]] -= 1;
      next[pick] = j;
      counts[j] = 1;
    }

    const bool stable = next == assign;
    assign = std::move(next);
    if (stable) break;

    centroids.setZero();
    for (int i = 0; i < data.count(); ++i) centroids.col(assign[i]) += x.col(i);
    for (int j = 0; j < entries; ++j)
      if (counts[j] > 0) centroids.col(j) /= static_cast<double>(counts[j]);
  }
  return entries_from_clusters(data, assign, entries, noise_var, power_budget, settings);
}

Codebook random_codebook(int entries, const ArrayGeometry& geometry, double power_budget,
                         std::uint64_t seed) {
  geometry.validate();
  const int n_tx = geometry.tx_total();
  const int n_rx = geometry.rx_elements;
  if (n_rx > n_tx)
    throw std::invalid_argument("random_codebook: needs n_rx <= n_tx");

  Codebook cb;
  cb.power_budget = power_budget;
  cb.n_tx = n_tx;
  cb.n_rx = n_rx;
  cb.directional.reserve(entries);
  for (int k = 0; k < entries; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k), 0x72616e64ULL));
    CMat g(n_tx, n_rx);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.cnormal();
    Eigen::HouseholderQR<CMat> qr(g);
    CMat q = qr.householderQ() * CMat::Identity(n_tx, n_rx);
    // Phase-fix the R diagonal so the frame is Haar distributed.
    const CMat r = qr.matrixQR().topRows(n_rx).triangularView<Eigen::Upper>();
    for (int j = 0; j < n_rx; ++j) {
      const cd d = r(j, j);
      if (std::abs(d) > 0.0) q.col(j) *= d / std::abs(d);
    }
    cb.directional.push_back(std::move(q));
  }
  return cb;
}

int select_entry_by_rate(const Codebook& codebook, const CMat& channel_estimate,
                         double noise_var) {
  if (codebook.entries.empty())
    throw std::invalid_argument("select_entry_by_rate: codebook has no entries");
  int arg = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < static_cast<int>(codebook.entries.size()); ++k) {
    const double r = rate_unchecked(channel_estimate, codebook.entries[k], noise_var);
    if (r > best) {
      best = r;
      arg = k;
    }
  }
  return arg;
}

int select_entry_by_subspace(const Codebook& codebook, const CMat& channel_estimate) {
  if (codebook.directional.empty())
    throw std::invalid_argument("select_entry_by_subspace: empty codebook");
  int arg = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < codebook.size(); ++k) {
    const double c = (channel_estimate * codebook.directional[k]).squaredNorm();
    if (c > best) {
      best = c;
      arg = k;
    }
  }
  return arg;
}

}  // namespace gmmfb
