#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "econdeepc/losses.hpp"

namespace econdeepc {

struct GradCheckReport {
  double max_rel_err = 0.0;
  Eigen::Index n_checked = 0;
  Eigen::Index n_resampled = 0;  // coordinates redrawn because a ReLU kink sat inside the stencil
  Eigen::Index worst_index = -1;
  std::string worst_param;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central finite differences (step 1e-5 * (1 + |theta_i|)) against the
// analytic gradients of the weighted composite loss, over n_probes uniformly
// drawn coordinates spanning theta, q, P, b and G. Coordinates whose stencil
// straddles a ReLU kink (detected by a half-step consistency test) are
// redrawn and counted.
GradCheckReport finite_difference_check(const LiftingModel& model, const TrainingData& data,
                                        const std::vector<int>& window_indices,
                                        const LossWeights& weights, Eigen::Index n_probes,
                                        std::uint64_t seed);

}  // namespace econdeepc
