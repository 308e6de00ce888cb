#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "econdeepc/hankel.hpp"
#include "econdeepc/model.hpp"
#include "econdeepc/plant.hpp"
#include "econdeepc/qp.hpp"
#include "econdeepc/trajectory.hpp"

namespace econdeepc {

// Controller-side numerics use per-channel input scaling u_scaled = u / s with
// s_i = max(|lo_i|, |hi_i|) (1 when unbounded). Pure scaling, no offset, so an
// LTI plant stays LTI in the scaled input. All public interfaces speak
// physical units.
Eigen::VectorXd input_scale_from_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

struct ControllerConfig {
  Eigen::Index T_ini = 2;
  Eigen::Index N_p = 5;
  Eigen::VectorXd u_lo, u_hi;    // physical, +-inf allowed
  Eigen::VectorXd yc_lo, yc_hi;  // physical bounds on reconstructed outputs; size 0 disables
  Eigen::MatrixXd R;             // n_u x n_u, PD, acts on scaled input rates
  double beta = 1.0;
  double lambda_g = 0.0;
  double soft_init_penalty = 1e4;  // quadratic weight replacing the z_ini equality on fallback
  QpSettings qp;

  void validate(Eigen::Index n_u) const;
};

// The T_ini most recent (u, y) pairs plus the last applied input; everything
// the receding-horizon problem needs besides the offline data.
struct InitWindow {
  Eigen::MatrixXd u;  // T_ini x n_u, physical
  Eigen::MatrixXd y;  // T_ini x n_y
  Eigen::VectorXd u_prev;

  void push(const Eigen::VectorXd& u_new, const Eigen::VectorXd& y_new);
};

// Offline Hankel data in controller coordinates (scaled inputs, lifted
// outputs), full order or SVD-reduced.
struct ControlData {
  HankelBlocks blocks;
  Eigen::VectorXd u_scale;
  bool reduced = false;
  Eigen::Index n_r = 0;                // retained rank when reduced
  Eigen::VectorXd singular_values;     // of the stacked Hankel matrix when reduced

  Eigen::Index decision_dim() const { return blocks.cols(); }
};

// Builds [H(u_scaled); H(z)] partitions from one long trajectory. `model`
// defines the lifting; pass LiftingModel::identity(n_y) for z = y.
ControlData make_control_data(const Trajectory& hankel_traj, const LiftingModel& model,
                              Eigen::Index T_ini, Eigen::Index N_p,
                              const Eigen::VectorXd& u_scale);

// SVD order reduction of the stacked [input; lifted-output] Hankel matrix,
// with the retained factor W1*Sigma1 repartitioned into the four blocks.
ControlData reduce_control_data(const ControlData& full, const RetentionSpec& retention);

// --- QP assembly -------------------------------------------------------------

// Economic problem: decision g, objective
//   sum_j beta * sgn * (z_j' Q* z_j + P* z_j + b*) + du_j' R du_j + lambda_g ||g||^2
// with du_0 measured against u_prev, equality [U_p; Z_p] g = [u_ini; z_ini],
// boxes on every predicted input and (optionally) on G* z_j. In maximize mode
// the concave profit enters negated (sgn = -1) so the assembled H stays PSD.
QpProblem build_econ_qp(const HankelBlocks& blocks, const LiftingModel& model,
                        const ControllerConfig& cfg, const Eigen::VectorXd& u_scale,
                        const InitWindow& window);

// Baseline tracking problem: objective ||Y_f g - y_ref||_Q^2 + ||u - u_ref||_R^2
// with Q, R, refs in physical units (stacked over the horizon).
struct TrackingObjective {
  Eigen::MatrixXd Q;       // (n_y*N_p)^2
  Eigen::MatrixXd R;       // (n_u*N_p)^2
  Eigen::VectorXd y_ref;   // n_y*N_p
  Eigen::VectorXd u_ref;   // n_u*N_p
};

QpProblem build_tracking_qp(const HankelBlocks& blocks, const TrackingObjective& obj,
                            const ControllerConfig& cfg, const Eigen::VectorXd& u_scale,
                            const InitWindow& window,
                            const Eigen::VectorXd& y_lo = {}, const Eigen::VectorXd& y_hi = {});

// Optimal input sequence u* = U_f g* mapped back to physical units; the first
// block is clamped to the input box before application.
struct ExtractedInput {
  Eigen::MatrixXd sequence;  // N_p x n_u, physical
  Eigen::VectorXd first;     // clamped
  bool clamped = false;
};
ExtractedInput extract_input(const QpSolution& solution, const Eigen::MatrixXd& U_f,
                             const Eigen::VectorXd& u_scale, const Eigen::VectorXd& u_lo,
                             const Eigen::VectorXd& u_hi);

// --- Receding-horizon controllers --------------------------------------------

class IController {
 public:
  struct StepResult {
    Eigen::VectorXd u_apply;   // physical, clamped
    Eigen::MatrixXd u_seq;     // N_p x n_u, physical
    double objective = 0.0;
    QpStatus status = QpStatus::optimal;
    int iterations = 0;
    double solve_time_s = 0.0;
    bool fallback = false;        // held previous input
    bool soft_init = false;       // z_ini equality softened this step
    double yc_violation = 0.0;    // max predicted G*z bound violation (standardized units)
  };

  virtual ~IController() = default;
  virtual Eigen::Index n_u() const = 0;
  virtual StepResult step(const InitWindow& window) = 0;
};

class EconDeepcController final : public IController {
 public:
  EconDeepcController(const ControlData& data, const LiftingModel& model, ControllerConfig cfg);

  Eigen::Index n_u() const override { return cfg_.u_lo.size(); }
  Eigen::Index decision_dim() const { return data_.decision_dim(); }
  const ControlData& data() const { return data_; }

  StepResult step(const InitWindow& window) override;

 private:
  StepResult solve_step(const InitWindow& window, bool soft);

  ControlData data_;
  LiftingModel model_;
  ControllerConfig cfg_;
  // precomputed pieces
  Eigen::MatrixXd W_uprev_;       // f += W_uprev * u_prev_scaled
  Eigen::MatrixXd EtRE_;          // c0 += u_prev' EtRE u_prev
  Eigen::VectorXd f_econ_const_;
  double c0_const_ = 0.0;
  std::unique_ptr<QpSolver> solver_;
  std::unique_ptr<QpSolver> soft_solver_;  // z_ini as penalty, built on first use
  Eigen::MatrixXd soft_zp_term_;           // f += -2*mu*Z_p' z_ini in soft mode
  bool warm_ = false;
  bool request_soft_ = false;
};

class TrackingDeepcController final : public IController {
 public:
  TrackingDeepcController(const ControlData& data, TrackingObjective objective,
                          ControllerConfig cfg,
                          Eigen::VectorXd y_lo = {}, Eigen::VectorXd y_hi = {});

  Eigen::Index n_u() const override { return cfg_.u_lo.size(); }
  void set_reference(const Eigen::VectorXd& y_ref, const Eigen::VectorXd& u_ref);

  StepResult step(const InitWindow& window) override;

 private:
  ControlData data_;
  TrackingObjective obj_;
  ControllerConfig cfg_;
  Eigen::VectorXd y_lo_, y_hi_;
  std::unique_ptr<QpSolver> solver_;
  Eigen::MatrixXd YfTQ_, UfTSR_;  // f = -2 (YfTQ y_ref + UfTSR u_ref)
  bool warm_ = false;
};

class ConstantController final : public IController {
 public:
  explicit ConstantController(Eigen::VectorXd u, Eigen::Index N_p = 1)
      : u_(std::move(u)), N_p_(N_p) {}
  Eigen::Index n_u() const override { return u_.size(); }
  StepResult step(const InitWindow&) override;

 private:
  Eigen::VectorXd u_;
  Eigen::Index N_p_;
};

// --- Closed loop --------------------------------------------------------------

struct ClosedLoopOptions {
  int steps = 100;
  std::uint64_t seed = 0;
  Eigen::Index T_ini = 2;
  Eigen::VectorXd warmup_input;  // physical, applied for T_ini steps
};

struct StepRecord {
  double t = 0.0;
  Eigen::VectorXd x, y, u;
  double profit = 0.0;
  double objective = 0.0;
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
  double solve_time_s = 0.0;
  bool fallback = false;
  double yc_violation = 0.0;
};

struct SimResult {
  std::vector<StepRecord> records;
  double avg_profit = 0.0;
  double total_solve_s = 0.0;
  int n_fallbacks = 0;
  long n_clamped = 0;
  std::string mode, label;
  std::uint64_t seed = 0;
  double dt = 0.0;
};

SimResult run_closed_loop(PlantSim& plant, IController& controller,
                          const ClosedLoopOptions& options);

void save_sim_result(const SimResult& result, const std::string& path);
SimResult load_sim_result(const std::string& path);

}  // namespace econdeepc
