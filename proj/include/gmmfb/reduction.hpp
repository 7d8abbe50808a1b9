#pragma once

#include <utility>
#include <vector>

#include "gmmfb/gmm.hpp"

namespace gmmfb {

struct WeightedGaussian {
  double weight = 0.0;
  Gaussian component;
};

// Moment-preserving merge of two weighted components: the result matches the
// pair's zeroth, first and second moments exactly.
WeightedGaussian merge_pair(const Gaussian& a, const Gaussian& b, double weight_a,
                            double weight_b);

// Upper bound on the KL divergence increase caused by merging (a, b):
// 0.5 * [(wa+wb) logdet C_m - wa logdet C_a - wb logdet C_b].
double dissimilarity(const Gaussian& a, const Gaussian& b, double weight_a, double weight_b);

struct MergeStep {
  int index_a = 0;  // positions in the current (compacted) component list, a < b
  int index_b = 0;
  double dissimilarity = 0.0;
};

struct MergeTrace {
  std::vector<MergeStep> steps;  // length initial_k - final_k
  int initial_k = 0;
  int final_k = 0;
};

// Greedy pairwise reduction to `target_components`: repeatedly merges the
// minimum-dissimilarity pair (ties resolved toward the lexicographically
// smallest index pair).  After each step the merged component replaces slot
// index_a and slot index_b is erased, so recorded indices always refer to the
// compacted list at that step.  The reduced model is tagged as a full-
// covariance mixture regardless of the input structure.
std::pair<Gmm, MergeTrace> merge_gmm(const Gmm& model, int target_components);

struct PruneResult {
  Gmm model;
  std::vector<int> kept_indices;  // ascending, into the original component list
};

// Keeps the `target_components` heaviest components (weight ties drop the
// larger index first) and renormalizes the kept weights.
PruneResult prune_gmm(const Gmm& model, int target_components);

}  // namespace gmmfb
