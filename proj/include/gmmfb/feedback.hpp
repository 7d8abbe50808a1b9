#pragma once

#include "gmmfb/gmm.hpp"

namespace gmmfb {

struct FeedbackDecision {
  int index = 0;          // selected component, 0-based in [0, K)
  RVec responsibilities;  // posterior over components at the decision point
};

// Feedback from noisy pilot observations: argmax_k p(k | y) under the
// observation-domain mixture (ties resolved toward the smallest index).
// Needs no channel estimate and no codebook knowledge.
FeedbackDecision select_from_observation(const ObservationGmm& model, const CVec& y);

// Perfect-CSI variant: argmax_k p(k | h) under the channel-domain mixture.
FeedbackDecision select_from_channel(const Gmm& model, const CVec& h);

}  // namespace gmmfb
