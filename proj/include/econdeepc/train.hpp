#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "econdeepc/losses.hpp"

namespace econdeepc {

struct TrainConfig {
  LossWeights weights;
  int epochs = 100;
  int batch_size = 100;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Eigen::Index n_z = 10;
  Eigen::Index hidden_width = 128;
  int hidden_layers = 2;
  CostSign sign = CostSign::minimize;
  std::vector<int> yc_idx;  // empty selects every output channel

  void validate() const;
  std::string fingerprint() const;  // stable hash of every field above
};

struct EpochRecord {
  int epoch = 0;
  LossValues train;
  LossValues val;
};

struct TrainResult {
  LiftingModel model;  // best-validation parameters
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  bool diverged = false;  // aborted on non-finite loss; model holds the best checkpoint so far
};

// Minibatch Adam on the composite loss over the training-split windows;
// per-epoch train/validation losses recorded, best-validation parameters
// returned. Deterministic under cfg.seed.
TrainResult train(const Dataset& ds, const TrainConfig& cfg, const Eigen::VectorXd& u_scale);

// Fresh model with the configured architecture: fan-in uniform hidden
// weights, zero cost head, G at the least-squares reconstruction for the
// initial lift.
LiftingModel init_model(const TrainingData& data, const TrainConfig& cfg);

}  // namespace econdeepc
