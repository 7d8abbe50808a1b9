#pragma once

// Shared k-means++ seeding used by both the EM initializer and the Lloyd
// codebook baseline (Euclidean metric on complex sample columns).

#include <limits>
#include <vector>

#include "gmmfb/linalg.hpp"
#include "gmmfb/rng.hpp"

namespace gmmfb::detail {

inline std::vector<int> kmeanspp_seeds(const CMat& x, int k, Rng& rng) {
  const int l = static_cast<int>(x.cols());
  std::vector<int> seeds;
  seeds.reserve(k);
  seeds.push_back(static_cast<int>(rng.index(l)));
  RVec d2 = (x.colwise() - x.col(seeds[0])).colwise().squaredNorm().transpose();
  while (static_cast<int>(seeds.size()) < k) {
    const double total = d2.sum();
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.index(l));
    } else {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = l - 1;
      for (int i = 0; i < l; ++i) {
        acc += d2[i];
        if (acc > u) {
          pick = i;
          break;
        }
      }
    }
    seeds.push_back(pick);
    d2 = d2.cwiseMin((x.colwise() - x.col(pick)).colwise().squaredNorm().transpose());
  }
  return seeds;
}

// Nearest-centroid assignment (ties toward the smallest centroid index).
inline std::vector<int> nearest_assignment(const CMat& x, const CMat& centroids) {
  std::vector<int> assign(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < centroids.cols(); ++j) {
      const double d = (x.col(i) - centroids.col(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    assign[i] = arg;
  }
  return assign;
}

}  // namespace gmmfb::detail
