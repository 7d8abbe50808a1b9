#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmmfb/gmm.hpp"
#include "gmmfb/rng.hpp"
#include "kmeans.hpp"

namespace gmmfb {
namespace {

using detail::kmeanspp_seeds;

// Working state of one EM run over sample columns.
struct EmState {
  RVec weights;
  std::vector<CVec> means;
  std::vector<CMat> covs;
  std::vector<RVec> spectra;  // parallel to covs when a transform is present
};

struct EmPlan {
  int k = 1;
  int max_iter = 50;
  double tol = 1e-5;
  bool zero_mean = false;
  const CMat* transform = nullptr;  // D with C = D^H diag(c) D, or nullptr
  RVec transform_row_norm2;
};

CMat sample_covariance(const CMat& x, bool zero_mean) {
  const double l = static_cast<double>(x.cols());
  if (zero_mean) return hermitize(x * x.adjoint() / l);
  const CVec mean = x.rowwise().mean();
  const CMat centered = x.colwise() - mean;
  return hermitize(centered * centered.adjoint() / l);
}

// Spectrum of the transform-domain diagonal approximation of scatter s,
// floored and rescaled to preserve the trace.
RVec project_spectrum(const CMat& d, const RVec& row_norm2, const CMat& s) {
  RVec m = (d * s).cwiseProduct(d.conjugate()).rowwise().sum().real();
  const double floor = kEigFloorRel * std::max(m.sum(), 0.0) / static_cast<double>(m.size());
  RVec c = m.cwiseMax(floor);
  const double target = s.real().trace();
  const double current = c.dot(row_norm2);
  if (current > 0.0 && target > 0.0) c *= target / current;
  return c;
}

CMat spectrum_to_cov(const CMat& d, const RVec& c) {
  return hermitize(d.adjoint() * c.asDiagonal() * d);
}

// Per-component expected complete-data objective (up to constants):
// -(logdet C + tr(C^{-1} S)).  Used by the generalized-EM guard that keeps a
// structured covariance update only when it does not decrease the objective.
double gaussian_objective(const CMat& cov, const CMat& s) {
  const EigenFactor f = floored_eigen_factor(cov);
  if (!f.invertible) return -std::numeric_limits<double>::infinity();
  return -(f.log_det + f.solve(s).real().trace());
}

// Matrix of log(w_k) + log N_k(x_i) over all samples (rows) and components
// (columns), computed with per-component batched transforms.
RMat log_posterior_matrix(const RVec& weights, const std::vector<CVec>* means,
                          const std::vector<CMat>& covs, const CMat& x) {
  const int l = static_cast<int>(x.cols());
  const int k = static_cast<int>(covs.size());
  const double log_pi_term = static_cast<double>(x.rows()) * std::log(M_PI);
  RMat lp(l, k);
  for (int j = 0; j < k; ++j) {
    const EigenFactor f = floored_eigen_factor(covs[j]);
    if (!f.invertible) throw std::runtime_error("fit_em: singular component covariance");
    CMat z = f.vectors.adjoint() * x;
    if (means) z.colwise() -= CVec(f.vectors.adjoint() * (*means)[j]);
    const RVec inv_l = f.values.cwiseInverse();
    const RVec quad = (inv_l.transpose() * z.cwiseAbs2()).transpose();
    const double log_w =
        weights[j] > 0.0 ? std::log(weights[j]) : -std::numeric_limits<double>::infinity();
    lp.col(j) = (-quad.array() + (log_w - log_pi_term - f.log_det)).matrix();
  }
  return lp;
}

EmState initialize(const CMat& x, const EmPlan& plan, Rng& rng) {
  const int n = static_cast<int>(x.rows());
  const int l = static_cast<int>(x.cols());
  const int k = plan.k;
  const CMat global_cov = sample_covariance(x, plan.zero_mean);

  // Seed on a bounded random subsample to keep initialization cheap.
  const int sub = std::min(l, std::max(64 * k, 1024));
  CMat xs(n, sub);
  if (sub == l) {
    xs = x;
  } else {
    for (int i = 0; i < sub; ++i) xs.col(i) = x.col(rng.index(l));
  }
  const std::vector<int> seeds = kmeanspp_seeds(xs, k, rng);

  EmState st;
  st.weights = RVec::Constant(k, 1.0 / k);
  st.means.resize(k);
  st.covs.resize(k);
  if (plan.transform) st.spectra.resize(k);

  if (!plan.zero_mean) {
    for (int j = 0; j < k; ++j) {
      st.means[j] = xs.col(seeds[j]);
      st.covs[j] = global_cov;
    }
    return st;
  }

  // Zero-mean kinds: identical covariances would be a symmetric EM fixed
  // point, so break symmetry with per-cluster scatters of the hard
  // k-means++ assignment, blended with the global covariance for rank.
  std::vector<int> assign(sub, 0);
  for (int i = 0; i < sub; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      const double d = (xs.col(i) - xs.col(seeds[j])).squaredNorm();
      if (d < best) {
        best = d;
        assign[i] = j;
      }
    }
  }
  for (int j = 0; j < k; ++j) {
    CMat scatter = CMat::Zero(n, n);
    int count = 0;
    for (int i = 0; i < sub; ++i) {
      if (assign[i] != j) continue;
      scatter.noalias() += xs.col(i) * xs.col(i).adjoint();
      ++count;
    }
    CMat cov = count > 0 ? CMat(0.9 * scatter / count + 0.1 * global_cov) : global_cov;
    st.means[j] = CVec::Zero(n);
    if (plan.transform) {
      st.spectra[j] = project_spectrum(*plan.transform, plan.transform_row_norm2, cov);
      st.covs[j] = spectrum_to_cov(*plan.transform, st.spectra[j]);
    } else {
      st.covs[j] = hermitize(cov);
    }
    st.weights[j] = count > 0 ? static_cast<double>(count) / sub : 1.0 / (10.0 * k);
  }
  st.weights /= st.weights.sum();
  return st;
}

// One EM run; returns the final state and fills the per-iteration training
// log-likelihood trace.
EmState run_em(const CMat& x, const EmPlan& plan, Rng& rng, FitStage& stage) {
  const int n = static_cast<int>(x.rows());
  const int l = static_cast<int>(x.cols());
  const int k = plan.k;
  const CMat global_cov = sample_covariance(x, plan.zero_mean);

  EmState st = initialize(x, plan, rng);
  RMat resp(l, k);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < plan.max_iter; ++iter) {
    // E-step (log domain with max subtraction).
    const RMat lp =
        log_posterior_matrix(st.weights, plan.zero_mean ? nullptr : &st.means, st.covs, x);
    double ll = 0.0;
    for (int i = 0; i < l; ++i) {
      const double m = lp.row(i).maxCoeff();
      const RVec e = (lp.row(i).transpose().array() - m).exp().matrix();
      const double s = e.sum();
      resp.row(i) = e.transpose() / s;
      ll += m + std::log(s);
    }
    stage.loglik.push_back(ll);

    const bool converged =
        iter > 0 && (ll - prev_ll) < plan.tol * std::abs(prev_ll) && std::isfinite(prev_ll);
    prev_ll = ll;
    if (converged || iter == plan.max_iter - 1) break;

    // M-step.
    const RVec nk = resp.colwise().sum().transpose();
    for (int j = 0; j < k; ++j) {
      if (nk[j] < 0.1) {
        // Empty component: re-seed around a random sample.
        stage.reinit_events += 1;
        const CVec pick = x.col(rng.index(l));
        const double norm2 = std::max(pick.squaredNorm(), 1e-300);
        const CMat spike = pick * pick.adjoint() *
                           (global_cov.real().trace() / (norm2 * n));
        CMat cov = hermitize(0.5 * global_cov + 0.5 * spike * n);
        if (plan.zero_mean) {
          st.means[j].setZero();
        } else {
          st.means[j] = pick;
          cov = global_cov;
        }
        if (plan.transform) {
          st.spectra[j] = project_spectrum(*plan.transform, plan.transform_row_norm2, cov);
          st.covs[j] = spectrum_to_cov(*plan.transform, st.spectra[j]);
        } else {
          st.covs[j] = cov;
        }
        st.weights[j] = 1.0 / k;
        continue;
      }
      st.weights[j] = nk[j] / l;
      const RVec w = resp.col(j);
      const CMat xw = x * w.cast<cd>().asDiagonal();
      if (plan.zero_mean) {
        const CMat scatter = hermitize(xw * x.adjoint() / nk[j]);
        if (plan.transform) {
          const RVec cand =
              project_spectrum(*plan.transform, plan.transform_row_norm2, scatter);
          const CMat cand_cov = spectrum_to_cov(*plan.transform, cand);
          // Generalized-EM guard: only accept a projection that does not
          // decrease this component's weighted Gaussian objective.
          if (gaussian_objective(cand_cov, scatter) >=
              gaussian_objective(st.covs[j], scatter) - 1e-12) {
            st.spectra[j] = cand;
            st.covs[j] = cand_cov;
          }
        } else {
          st.covs[j] = scatter;
        }
      } else {
        const CVec mean = xw.rowwise().sum() / nk[j];
        st.covs[j] = hermitize(xw * x.adjoint() / nk[j] - mean * mean.adjoint());
        st.means[j] = mean;
      }
    }
    st.weights /= st.weights.sum();
  }
  return st;
}

CMat vectorized_columns(const Dataset& data) {
  const int n = data.geometry.channel_dim();
  CMat x(n, data.count());
  for (int i = 0; i < data.count(); ++i) x.col(i) = data.samples[i].vectorized();
  return x;
}

// Transmit-side samples: matrix rows as column vectors (plain transpose);
// receive-side samples: matrix columns.  Sample-major, then row/column index.
CMat tx_side_columns(const Dataset& data) {
  const int n_tx = data.geometry.tx_total();
  const int n_rx = data.geometry.rx_elements;
  CMat x(n_tx, static_cast<Eigen::Index>(data.count()) * n_rx);
  Eigen::Index c = 0;
  for (const auto& s : data.samples)
    for (int r = 0; r < n_rx; ++r) x.col(c++) = s.matrix.row(r).transpose();
  return x;
}

CMat rx_side_columns(const Dataset& data) {
  const int n_tx = data.geometry.tx_total();
  const int n_rx = data.geometry.rx_elements;
  CMat x(n_rx, static_cast<Eigen::Index>(data.count()) * n_tx);
  Eigen::Index c = 0;
  for (const auto& s : data.samples)
    for (int j = 0; j < n_tx; ++j) x.col(c++) = s.matrix.col(j);
  return x;
}

double dataset_log_likelihood(const Gmm& model, const CMat& x) {
  std::vector<CVec> means;
  std::vector<CMat> covs;
  means.reserve(model.size());
  covs.reserve(model.size());
  for (const auto& c : model.components()) {
    means.push_back(c.mean);
    covs.push_back(c.cov);
  }
  const RMat lp = log_posterior_matrix(model.weights(), &means, covs, x);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < lp.rows(); ++i) {
    const double m = lp.row(i).maxCoeff();
    ll += m + std::log((lp.row(i).transpose().array() - m).exp().sum());
  }
  return ll;
}

}  // namespace

Gmm fit_em(const Dataset& data, const FitOptions& options) {
  data.geometry.validate();
  if (data.count() < 2) throw std::invalid_argument("fit_em: need at least two samples");
  if (options.max_iter < 1) throw std::invalid_argument("fit_em: max_iter must be >= 1");
  if (options.tol < 0.0) throw std::invalid_argument("fit_em: tol must be >= 0");
  const CovarianceStructure structure = options.structure;
  const ArrayGeometry geom = data.geometry;

  if (structure.kind == CovarianceKind::full) {
    if (options.components < 1) throw std::invalid_argument("fit_em: components must be >= 1");
    const CMat x = vectorized_columns(data);
    EmPlan plan;
    plan.k = options.components;
    plan.max_iter = options.max_iter;
    plan.tol = options.tol;
    Rng rng(derive_seed(options.seed, 0x66756c6cULL));
    FitStage stage{"full", {}, 0};
    EmState st = run_em(x, plan, rng, stage);

    std::vector<Gaussian> comps(plan.k);
    for (int j = 0; j < plan.k; ++j) comps[j] = {st.means[j], st.covs[j]};
    Gmm model(st.weights, std::move(comps), {CovarianceKind::full, 0, 0}, geom);
    FitInfo info;
    info.em_iters = static_cast<int>(stage.loglik.size());
    info.final_loglik = stage.loglik.back();
    info.stages.push_back(std::move(stage));
    model.set_fit_info(std::move(info));
    return model;
  }

  // Kron family: zero-mean per-side fits, then all pairwise combinations.
  const int k_tx = structure.tx_components;
  const int k_rx = structure.rx_components;
  if (k_tx < 1 || k_rx < 1)
    throw std::invalid_argument("fit_em: side component counts must be >= 1");
  if (options.components != k_tx * k_rx)
    throw std::invalid_argument("fit_em: components must equal K_tx * K_rx");

  const bool structured = structure.kind != CovarianceKind::kronecker;
  CMat d_tx, d_rx;
  if (structured) {
    d_tx = structured_transform_ura(structure.kind, geom.tx_vertical, geom.tx_horizontal);
    d_rx = structured_transform_ula(structure.kind, geom.rx_elements);
  }

  auto side_plan = [&](int k, const CMat* d) {
    EmPlan plan;
    plan.k = k;
    plan.max_iter = options.max_iter;
    plan.tol = options.tol;
    plan.zero_mean = true;
    plan.transform = d;
    if (d) plan.transform_row_norm2 = d->rowwise().squaredNorm().real();
    return plan;
  };

  const CMat x_tx = tx_side_columns(data);
  const CMat x_rx = rx_side_columns(data);
  Rng rng_tx(derive_seed(options.seed, 0x7478ULL));
  Rng rng_rx(derive_seed(options.seed, 0x7278ULL));
  FitStage stage_tx{"tx", {}, 0};
  FitStage stage_rx{"rx", {}, 0};
  EmState st_tx = run_em(x_tx, side_plan(k_tx, structured ? &d_tx : nullptr), rng_tx, stage_tx);
  EmState st_rx = run_em(x_rx, side_plan(k_rx, structured ? &d_rx : nullptr), rng_rx, stage_rx);

  const int n = geom.channel_dim();
  RVec weights(k_tx * k_rx);
  std::vector<Gaussian> comps(k_tx * k_rx);
  for (int i = 0; i < k_tx; ++i) {
    for (int m = 0; m < k_rx; ++m) {
      const int k = i * k_rx + m;
      weights[k] = st_tx.weights[i] * st_rx.weights[m];
      comps[k] = {CVec::Zero(n), kron(st_tx.covs[i], st_rx.covs[m])};
    }
  }
  weights /= weights.sum();

  Gmm model(std::move(weights), std::move(comps), structure, geom);
  SideModel side;
  side.tx_weights = st_tx.weights;
  side.rx_weights = st_rx.weights;
  side.tx_covs = st_tx.covs;
  side.rx_covs = st_rx.covs;
  side.tx_spectra = st_tx.spectra;
  side.rx_spectra = st_rx.spectra;
  model.set_side_model(std::move(side));

  FitInfo info;
  info.em_iters =
      static_cast<int>(stage_tx.loglik.size()) + static_cast<int>(stage_rx.loglik.size());
  info.final_loglik = dataset_log_likelihood(model, vectorized_columns(data));
  info.stages.push_back(std::move(stage_tx));
  info.stages.push_back(std::move(stage_rx));
  model.set_fit_info(std::move(info));
  return model;
}

}  // namespace gmmfb
