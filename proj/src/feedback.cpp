#include "gmmfb/feedback.hpp"

namespace gmmfb {
namespace {

FeedbackDecision argmax_decision(RVec responsibilities) {
  FeedbackDecision d;
  d.index = 0;
  double best = responsibilities[0];
  for (int k = 1; k < responsibilities.size(); ++k) {
    if (responsibilities[k] > best) {  // strict: ties keep the smallest index
      best = responsibilities[k];
      d.index = k;
    }
  }
  d.responsibilities = std::move(responsibilities);
  return d;
}

}  // namespace

FeedbackDecision select_from_observation(const ObservationGmm& model, const CVec& y) {
  return argmax_decision(model.responsibilities(y));
}

FeedbackDecision select_from_channel(const Gmm& model, const CVec& h) {
  return argmax_decision(model.responsibilities(h));
}

}  // namespace gmmfb
