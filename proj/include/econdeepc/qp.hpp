#pragma once

#include <memory>

#include <Eigen/Dense>

namespace econdeepc {

// Convex quadratic program of the controller's shape:
//
//   min  1/2 x'Hx + f'x + c0
//   s.t. A_eq x = b_eq
//        lo <= A_box x <= hi   (entries may be +-inf)
//
// H must be symmetric positive semidefinite (up to round-off).
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  double c0 = 0.0;
  Eigen::MatrixXd A_eq;   // may have zero rows
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_box;  // may have zero rows
  Eigen::VectorXd lo, hi;

  Eigen::Index n() const { return H.rows(); }
  double objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(H * x) + f.dot(x) + c0;
  }
  // Throws on asymmetric H, indefinite H beyond tolerance, or lo > hi.
  void validate() const;
};

enum class QpStatus { optimal, infeasible, max_iterations };
const char* to_string(QpStatus s);

struct QpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iterations;
  int iterations = 0;
  double primal_residual = 0.0;  // max equality / box violation
  double dual_residual = 0.0;    // stationarity ||Hx + f + C'y||_inf
  double comp_slackness = 0.0;
  bool polished = false;
};

struct QpSettings {
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  double tol_comp = 1e-6;
  int max_iters = 20000;
  double sigma = 1e-6;        // proximal regularization
  double alpha = 1.6;         // over-relaxation
  double rho = 0.1;           // base penalty for box rows
  double rho_eq_scale = 1e3;  // equality rows get rho * rho_eq_scale
  bool adaptive_rho = true;
  bool polish = true;
  int check_every = 25;
};

// Operator-splitting (ADMM) solver with an optional active-set polish step.
// The quadratic term and constraint geometry are fixed at construction so the
// linear-system factorization is reused across solves; f, b_eq and the box
// bounds can be updated cheaply in between — the receding-horizon pattern.
class QpSolver {
 public:
  explicit QpSolver(QpProblem problem, QpSettings settings = {});
  ~QpSolver();
  QpSolver(QpSolver&&) noexcept;
  QpSolver& operator=(QpSolver&&) noexcept;

  void set_linear_cost(const Eigen::VectorXd& f, double c0 = 0.0);
  void set_equality_rhs(const Eigen::VectorXd& b_eq);
  void set_box_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  QpSolution solve();                               // cold start
  QpSolution solve_warm();                          // continue from last solution
  QpSolution solve_from(const Eigen::VectorXd& x0); // user-supplied iterate

  const QpProblem& problem() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

}  // namespace econdeepc
