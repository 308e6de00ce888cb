#include "econdeepc/gradcheck.hpp"

#include <cmath>

#include "econdeepc/error.hpp"
#include "econdeepc/rng.hpp"

namespace econdeepc {

GradCheckReport finite_difference_check(const LiftingModel& model, const TrainingData& data,
                                        const std::vector<int>& window_indices,
                                        const LossWeights& weights, Eigen::Index n_probes,
                                        std::uint64_t seed) {
  ModelGrads grads = grads_shape(model);
  compute_loss(model, data, window_indices, weights, &grads);

  LiftingModel probe = model;  // mutated and restored around each stencil
  auto eval = [&](Eigen::Index idx, double delta) {
    add_to_param(probe, idx, delta);
    const double v = compute_loss(probe, data, window_indices, weights, nullptr).total;
    add_to_param(probe, idx, -delta);
    return v;
  };

  const Eigen::Index n_params = param_count(model);
  Rng rng(seed);
  GradCheckReport rep;
  const Eigen::Index max_attempts = 12 * n_probes;

  Eigen::Index attempts = 0;
  while (rep.n_checked < n_probes && attempts < max_attempts) {
    ++attempts;
    const Eigen::Index idx =
        static_cast<Eigen::Index>(rng.raw() % static_cast<std::uint64_t>(n_params));
    const double theta = get_param(model, idx);
    const double h = 1e-5 * (1.0 + std::abs(theta));

    const double fp = eval(idx, h);
    const double fm = eval(idx, -h);
    const double fd = (fp - fm) / (2.0 * h);

    // Half-step consistency: a smooth loss halves the truncation error by 4x,
    // a kink inside the stencil does not.
    const double fp2 = eval(idx, 0.5 * h);
    const double fm2 = eval(idx, -0.5 * h);
    const double fd2 = (fp2 - fm2) / h;
    if (std::abs(fd - fd2) > 1e-3 * std::max(1.0, std::abs(fd))) {
      ++rep.n_resampled;
      continue;
    }

    const double g = get_grad(grads, idx);
    const double denom = std::max({std::abs(fd), std::abs(g), 1e-10});
    const double rel = std::abs(fd - g) / denom;
    ++rep.n_checked;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = idx;
      rep.worst_param = describe_param(model, idx);
      rep.worst_analytic = g;
      rep.worst_numeric = fd;
    }
  }
  if (rep.n_checked < n_probes)
    fail(ErrorKind::numeric,
         "gradient check could not find enough kink-free coordinates (checked " +
             std::to_string(rep.n_checked) + ")");
  return rep;
}

}  // namespace econdeepc
