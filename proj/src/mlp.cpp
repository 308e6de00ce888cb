#include "econdeepc/mlp.hpp"

#include <cmath>

#include "econdeepc/error.hpp"

namespace econdeepc {

Mlp::Mlp(const std::vector<Eigen::Index>& sizes, Rng& rng) {
  if (sizes.size() < 2) fail(ErrorKind::invalid_argument, "Mlp needs at least input and output sizes");
  layers_.reserve(sizes.size() - 1);
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    DenseLayer l;
    l.W.resize(sizes[k + 1], sizes[k]);
    const double s = 1.0 / std::sqrt(static_cast<double>(sizes[k]));
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) l.W(i, j) = rng.uniform(-s, s);
    l.b = Eigen::VectorXd::Zero(sizes[k + 1]);
    layers_.push_back(std::move(l));
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X) const {
  if (X.cols() != n_in()) fail(ErrorKind::invalid_argument, "Mlp::forward: input width mismatch");
  if (!X.allFinite()) fail(ErrorKind::numeric, "Mlp::forward: non-finite input");
  Eigen::MatrixXd a = X;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Eigen::MatrixXd z = (a * layers_[k].W.transpose()).rowwise() + layers_[k].b.transpose();
    if (k + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X, Trace& trace) const {
  if (X.cols() != n_in()) fail(ErrorKind::invalid_argument, "Mlp::forward: input width mismatch");
  if (!X.allFinite()) fail(ErrorKind::numeric, "Mlp::forward: non-finite input");
  trace.input = X;
  trace.pre.resize(layers_.size());
  Eigen::MatrixXd a = X;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    trace.pre[k] = (a * layers_[k].W.transpose()).rowwise() + layers_[k].b.transpose();
    a = (k + 1 < layers_.size()) ? trace.pre[k].cwiseMax(0.0) : trace.pre[k];
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const Trace& trace, const Eigen::MatrixXd& d_out,
                              MlpGrad& grad) const {
  if (grad.layers.size() != layers_.size())
    fail(ErrorKind::invalid_argument, "Mlp::backward: gradient shape mismatch");
  Eigen::MatrixXd delta = d_out;  // d(loss)/d(pre-activation of last layer)
  for (std::size_t k = layers_.size(); k-- > 0;) {
    // activation feeding layer k
    Eigen::MatrixXd a_in =
        (k == 0) ? trace.input : Eigen::MatrixXd(trace.pre[k - 1].cwiseMax(0.0));
    grad.layers[k].W.noalias() += delta.transpose() * a_in;
    grad.layers[k].b += delta.colwise().sum().transpose();
    if (k == 0) {
      return delta * layers_[0].W;
    }
    Eigen::MatrixXd d_prev = delta * layers_[k].W;
    // ReLU mask of layer k-1
    delta = d_prev.cwiseProduct((trace.pre[k - 1].array() > 0.0).cast<double>().matrix());
  }
  return {};
}

MlpGrad Mlp::grad_shape() const {
  MlpGrad g;
  g.layers.resize(layers_.size());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    g.layers[k].W = Eigen::MatrixXd::Zero(layers_[k].W.rows(), layers_[k].W.cols());
    g.layers[k].b = Eigen::VectorXd::Zero(layers_[k].b.size());
  }
  return g;
}

}  // namespace econdeepc
