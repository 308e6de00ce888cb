#pragma once

#include <vector>

#include <Eigen/Dense>

#include "econdeepc/dataset.hpp"
#include "econdeepc/model.hpp"

namespace econdeepc {

// Composite training loss, all three terms expressed as mean squares per
// scalar entry so that equal weights are meaningful on standardized data:
//
//   econ   = (||c_T - c^_T||^2 + mean_w ||c_L - c^_L||^2) / (T + L)
//   recon  = (||Yc_T - G Z_T||^2 + mean_w ||Yc_L - G Z_L||^2) / ((T + L) n_c)
//   linear = mean_w ||z_L - H_L(z_T) g_w||^2 / (n_z L),  g_w = H_L(u_T)^+ u_L
//
// The T-length Hankel-trajectory terms are shared by every item and therefore
// enter every minibatch; g_w does not depend on the lifting and is
// precomputed once.

struct LossWeights {
  double econ = 1.0, recon = 1.0, linear = 1.0;
  void validate() const;
};

struct LossValues {
  double total = 0.0, econ = 0.0, recon = 0.0, linear = 0.0;
};

// Dataset prepared for training: standardized targets, constrained-output
// selections, and the lemma coefficients of every window.
struct TrainingData {
  Eigen::MatrixXd Y_T;    // T x n_y, physical outputs of the Hankel trajectory
  Eigen::VectorXd cN_T;   // standardized cost labels
  Eigen::MatrixXd YcN_T;  // standardized constrained outputs (T x n_c)

  struct Window {
    Eigen::MatrixXd Y;    // L x n_y, physical
    Eigen::VectorXd cN;   // standardized
    Eigen::MatrixXd YcN;  // L x n_c, standardized
  };
  std::vector<Window> windows;
  Eigen::MatrixXd g_all;  // (T-L+1) x n_windows

  std::vector<int> train_idx, val_idx, test_idx;
  Eigen::Index L = 0;

  Eigen::VectorXd y_mean, y_std;
  double c_mean = 0.0, c_std = 1.0;
  std::vector<int> yc_idx;
  Eigen::VectorXd u_scale;

  Eigen::Index T() const { return Y_T.rows(); }
  Eigen::Index n_c() const { return YcN_T.cols(); }
};

TrainingData prepare_training_data(const Dataset& ds, const std::vector<int>& yc_idx,
                                   const Eigen::VectorXd& u_scale);

// Loss (and optionally gradients of the weighted total) over the given
// windows. Passing grads = nullptr evaluates only.
LossValues compute_loss(const LiftingModel& model, const TrainingData& data,
                        const std::vector<int>& window_indices, const LossWeights& weights,
                        ModelGrads* grads);

// --- Stand-alone loss terms --------------------------------------------------

// Mean squared error between approx_cost(head, z) and the labels.
double loss_econ(const CostHead& head, const Eigen::MatrixXd& z_rows,
                 const Eigen::VectorXd& c_targets);

// Mean squared reconstruction error per scalar entry.
double loss_recon(const Eigen::MatrixXd& G, const Eigen::MatrixXd& z_rows,
                  const Eigen::MatrixXd& yc_rows);

// Lemma-conformance loss of one window against a Hankel trajectory, computed
// from scratch (inputs scaled per channel before the pseudo-inverse).
double loss_linear(const LiftingModel& model, const Trajectory& hankel_traj,
                   const Trajectory& window, const Eigen::VectorXd& u_scale);

// Weighted composite over a window batch (evaluation only).
LossValues total_loss(const LiftingModel& model, const TrainingData& data,
                      const std::vector<int>& window_indices, const LossWeights& weights);

}  // namespace econdeepc
