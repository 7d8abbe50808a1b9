#include "gmmfb/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gmmfb {
namespace {

double log_det_floored(const CMat& cov) {
  const EigenFactor f = floored_eigen_factor(cov);
  if (!f.invertible)
    throw std::domain_error("reduction: determinant underflow (singular covariance)");
  return f.log_det;
}

}  // namespace

WeightedGaussian merge_pair(const Gaussian& a, const Gaussian& b, double weight_a,
                            double weight_b) {
  if (weight_a < 0.0 || weight_b < 0.0 || weight_a + weight_b <= 0.0)
    throw std::invalid_argument("merge_pair: weights must be non-negative with positive sum");
  if (a.mean.size() != b.mean.size())
    throw std::invalid_argument("merge_pair: dimension mismatch");
  const double wm = weight_a + weight_b;
  const double fa = weight_a / wm;
  const double fb = weight_b / wm;
  WeightedGaussian out;
  out.weight = wm;
  out.component.mean = fa * a.mean + fb * b.mean;
  const CVec diff = a.mean - b.mean;
  out.component.cov = hermitize(fa * a.cov + fb * b.cov + (fa * fb) * (diff * diff.adjoint()));
  return out;
}

double dissimilarity(const Gaussian& a, const Gaussian& b, double weight_a, double weight_b) {
  const WeightedGaussian m = merge_pair(a, b, weight_a, weight_b);
  return 0.5 * (m.weight * log_det_floored(m.component.cov) -
                weight_a * log_det_floored(a.cov) - weight_b * log_det_floored(b.cov));
}

std::pair<Gmm, MergeTrace> merge_gmm(const Gmm& model, int target_components) {
  const int k0 = model.size();
  if (target_components < 1 || target_components > k0)
    throw std::invalid_argument("merge_gmm: target must be in [1, K]");

  std::vector<double> weights(model.weights().data(), model.weights().data() + k0);
  std::vector<Gaussian> comps(model.components());
  std::vector<double> log_dets(k0);
  for (int i = 0; i < k0; ++i) log_dets[i] = log_det_floored(comps[i].cov);

  auto pair_cost = [&](int i, int j) {
    const WeightedGaussian m = merge_pair(comps[i], comps[j], weights[i], weights[j]);
    return 0.5 * (m.weight * log_det_floored(m.component.cov) - weights[i] * log_dets[i] -
                  weights[j] * log_dets[j]);
  };

  // Pairwise cost cache, rebuilt only for pairs touching the merged slot.
  int k = k0;
  std::vector<std::vector<double>> cost(k);
  for (int i = 0; i < k; ++i) {
    cost[i].resize(k, std::numeric_limits<double>::infinity());
    for (int j = i + 1; j < k; ++j) cost[i][j] = pair_cost(i, j);
  }

  MergeTrace trace;
  trace.initial_k = k0;
  trace.final_k = target_components;
  while (k > target_components) {
    int best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        // Strict < keeps the earliest (lexicographically smallest) pair on ties.
        if (cost[i][j] < best) {
          best = cost[i][j];
          best_a = i;
          best_b = j;
        }
      }
    }
    trace.steps.push_back({best_a, best_b, best});

    const WeightedGaussian merged =
        merge_pair(comps[best_a], comps[best_b], weights[best_a], weights[best_b]);
    comps[best_a] = merged.component;
    weights[best_a] = merged.weight;
    log_dets[best_a] = log_det_floored(merged.component.cov);
    comps.erase(comps.begin() + best_b);
    weights.erase(weights.begin() + best_b);
    log_dets.erase(log_dets.begin() + best_b);
    --k;

    // Compact the cache and refresh every pair involving the merged slot.
    for (int i = 0; i < k; ++i) cost[i].erase(cost[i].begin() + best_b);
    cost.erase(cost.begin() + best_b);
    for (int i = 0; i < best_a; ++i) cost[i][best_a] = pair_cost(i, best_a);
    for (int j = best_a + 1; j < k; ++j) cost[best_a][j] = pair_cost(best_a, j);
  }

  RVec w = Eigen::Map<const RVec>(weights.data(), k);
  w /= w.sum();  // exact simplex after accumulated roundoff
  Gmm reduced(w, std::move(comps), {CovarianceKind::full, 0, 0}, model.geometry());
  return {std::move(reduced), std::move(trace)};
}

PruneResult prune_gmm(const Gmm& model, int target_components) {
  const int k0 = model.size();
  if (target_components < 1 || target_components > k0)
    throw std::invalid_argument("prune_gmm: target must be in [1, K]");

  // Drop the lowest-weight components; on ties the larger index goes first,
  // i.e. the smaller index survives.
  std::vector<int> order(k0);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    if (model.weights()[i] != model.weights()[j]) return model.weights()[i] > model.weights()[j];
    return i < j;
  });
  std::vector<int> kept(order.begin(), order.begin() + target_components);
  std::sort(kept.begin(), kept.end());

  RVec w(target_components);
  std::vector<Gaussian> comps(target_components);
  for (int i = 0; i < target_components; ++i) {
    w[i] = model.weights()[kept[i]];
    comps[i] = model.component(kept[i]);
  }
  w /= w.sum();
  Gmm reduced(std::move(w), std::move(comps), {CovarianceKind::full, 0, 0}, model.geometry());
  return {std::move(reduced), std::move(kept)};
}

}  // namespace gmmfb
