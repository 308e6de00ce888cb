#pragma once

#include <Eigen/Dense>

#include "econdeepc/error.hpp"

namespace econdeepc {

// A sampled input/output/cost record. Rows are time steps: inputs.row(k) is
// u_k, outputs.row(k) the measurement y_k taken when u_k is applied, and
// costs(k) the realized stage cost/profit of (u_k, y_k).
struct Trajectory {
  Eigen::MatrixXd inputs;   // T x n_u
  Eigen::MatrixXd outputs;  // T x n_y
  Eigen::VectorXd costs;    // T
  double dt = 0.0;          // sampling period [h]

  Eigen::Index length() const { return inputs.rows(); }
  Eigen::Index n_u() const { return inputs.cols(); }
  Eigen::Index n_y() const { return outputs.cols(); }

  void validate() const {
    if (inputs.rows() < 1) fail(ErrorKind::invalid_argument, "trajectory is empty");
    if (outputs.rows() != inputs.rows() || costs.size() != inputs.rows())
      fail(ErrorKind::invalid_argument, "trajectory fields disagree on length");
    if (!(dt > 0.0)) fail(ErrorKind::invalid_argument, "trajectory dt must be positive");
  }
};

}  // namespace econdeepc
