#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "econdeepc/mlp.hpp"

namespace econdeepc {

enum class CostSign { minimize, maximize };
const char* to_string(CostSign s);
CostSign cost_sign_from_string(const std::string& s);

// Quadratic stage-cost surrogate  c(z) = z' diag(s*exp(q)) z + P z + b  with
// s = +1 in minimize mode (positive definite curvature) and s = -1 in maximize
// mode (negative definite). The diagonal-exponential parameterization keeps
// the sign of the curvature fixed for every finite q.
struct CostHead {
  Eigen::VectorXd q;      // n_z
  Eigen::RowVectorXd P;   // 1 x n_z
  double b = 0.0;
  CostSign sign = CostSign::minimize;

  Eigen::Index n_z() const { return q.size(); }
  double curvature_sign() const { return sign == CostSign::minimize ? 1.0 : -1.0; }
  Eigen::VectorXd curvature() const {
    return curvature_sign() * q.array().exp().matrix();
  }
};

double approx_cost(const CostHead& head, const Eigen::VectorXd& z);
Eigen::VectorXd approx_cost(const CostHead& head, const Eigen::MatrixXd& z_rows);

// Everything learned offline: the output lifting, cost head, reconstruction
// matrix, and the normalization statistics they were trained with. lift()
// takes physical outputs and standardizes internally; approx_cost and
// reconstruct operate in standardized cost / output units (use the *_physical
// helpers to convert back).
struct LiftingModel {
  Mlp net;
  CostHead head;
  Eigen::MatrixXd G;          // n_c x n_z
  std::vector<int> yc_idx;    // which output channels G reconstructs
  Eigen::VectorXd y_mean, y_std;
  double c_mean = 0.0, c_std = 1.0;
  std::string fingerprint;    // training-config fingerprint

  Eigen::Index n_y() const { return net.n_in(); }
  Eigen::Index n_z() const { return net.n_out(); }
  Eigen::Index n_c() const { return G.rows(); }

  Eigen::VectorXd lift(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd lift(const Eigen::MatrixXd& y_rows) const;
  Eigen::MatrixXd normalize_y(const Eigen::MatrixXd& y_rows) const;

  Eigen::VectorXd reconstruct(const Eigen::VectorXd& z) const;  // standardized y^c
  double cost_to_physical(double c_norm) const { return c_norm * c_std + c_mean; }
  // Map physical bounds on the constrained channels into the standardized
  // space reconstruct() lives in.
  Eigen::VectorXd yc_bound_to_normalized(const Eigen::VectorXd& bound_physical) const;

  void validate() const;

  // Identity lift (z = y), unit statistics, zero head; the building block for
  // reducing the economic controller to a plain tracking controller in tests.
  static LiftingModel identity(Eigen::Index n_y, CostSign sign = CostSign::minimize);
};

void save_model(const LiftingModel& model, const std::string& path);
LiftingModel load_model(const std::string& path);

// Flat parameter indexing across (net weights/biases, q, P, b, G) in a fixed
// order; used by the optimizer and the finite-difference gradient check.
struct ModelGrads {
  MlpGrad net;
  Eigen::VectorXd q;
  Eigen::RowVectorXd P;
  double b = 0.0;
  Eigen::MatrixXd G;
  void setZero();
};

ModelGrads grads_shape(const LiftingModel& model);
Eigen::Index param_count(const LiftingModel& model);
double get_param(const LiftingModel& model, Eigen::Index flat_index);
void add_to_param(LiftingModel& model, Eigen::Index flat_index, double delta);
double get_grad(const ModelGrads& grads, Eigen::Index flat_index);
// Human-readable location of a flat index ("net.layer1.W(3,7)", "q(2)", ...).
std::string describe_param(const LiftingModel& model, Eigen::Index flat_index);

}  // namespace econdeepc
