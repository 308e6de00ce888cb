#pragma once

#include <vector>

#include <Eigen/Dense>

#include "econdeepc/rng.hpp"

namespace econdeepc {

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

struct MlpGrad {
  std::vector<DenseLayer> layers;
  void setZero() {
    for (auto& l : layers) {
      l.W.setZero();
      l.b.setZero();
    }
  }
};

// Fully connected network, ReLU on hidden layers, linear output. Batches are
// row-major: one sample per row.
class Mlp {
 public:
  Mlp() = default;
  // sizes = {n_in, hidden..., n_out}; fan-in-scaled uniform weight init,
  // zero biases.
  Mlp(const std::vector<Eigen::Index>& sizes, Rng& rng);

  Eigen::Index n_in() const { return layers_.empty() ? 0 : layers_.front().W.cols(); }
  Eigen::Index n_out() const { return layers_.empty() ? 0 : layers_.back().W.rows(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;

  // Forward pass retaining what the backward pass needs.
  struct Trace {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer
  };
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Trace& trace) const;

  // Accumulates parameter gradients into grad (which must be zeroed/shaped by
  // grad_shape) and returns d(loss)/d(input).
  Eigen::MatrixXd backward(const Trace& trace, const Eigen::MatrixXd& d_out,
                           MlpGrad& grad) const;

  MlpGrad grad_shape() const;

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace econdeepc
