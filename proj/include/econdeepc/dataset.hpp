#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "econdeepc/plant.hpp"
#include "econdeepc/trajectory.hpp"

namespace econdeepc {

enum class SplitTag { unassigned, train, val, test };
const char* to_string(SplitTag t);
SplitTag split_tag_from_string(const std::string& s);

struct DatasetMeta {
  std::uint64_t seed = 0;
  NoiseConfig noise;
  double dt = 0.0;
  Eigen::Index n_u = 0, n_y = 0;
  Eigen::Index T_hankel = 0;
  Eigen::Index L = 0;
  Eigen::Index n_windows = 0;
  std::string split_ratio;  // e.g. "7:2:1", empty before split()
  std::uint64_t split_seed = 0;
  std::string created;      // ISO timestamp, informational only
};

// Open-loop data: one long trajectory reserved for the Hankel matrices plus
// L-step windows for training, with economic cost labels attached.
struct Dataset {
  Trajectory hankel_traj;
  std::vector<Trajectory> windows;
  std::vector<SplitTag> tags;  // one per window
  DatasetMeta meta;

  void validate() const;
  Eigen::Index count(SplitTag t) const;
};

// I.i.d. uniform excitation inside the input box, one row per step.
Eigen::MatrixXd excite(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                       Eigen::Index T, std::uint64_t seed);

// Rolls one T_hankel-step open-loop trajectory for the Hankel matrices, then a
// second rollout chopped into non-overlapping L-step windows until at least
// n_window_samples time steps exist; every record is labeled with the plant's
// stage value.
Dataset generate(PlantSim& plant, Eigen::Index T_hankel, Eigen::Index n_window_samples,
                 Eigen::Index L, std::uint64_t seed);

// Random permutation then proportional assignment of windows to
// train/val/test; deterministic under seed. Ratio like 7:2:1.
void split(Dataset& ds, double r_train, double r_val, double r_test, std::uint64_t seed);

// dataset.csv (one row per time step) + dataset.meta in `dir`; the column
// order is documented in docs/formats.md.
void save(const Dataset& ds, const std::string& dir);
Dataset load(const std::string& dir);

}  // namespace econdeepc
