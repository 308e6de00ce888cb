#include "econdeepc/controller.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "econdeepc/error.hpp"
#include "econdeepc/io.hpp"

namespace econdeepc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd stack_rows(const Eigen::MatrixXd& rows) {
  Eigen::VectorXd v(rows.size());
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    v.segment(i * rows.cols(), rows.cols()) = rows.row(i).transpose();
  return v;
}

// Difference operator on the stacked input sequence: (D u)_0 = u_0 and
// (D u)_j = u_j - u_{j-1}; the u_prev contribution is handled separately.
Eigen::MatrixXd rate_difference(Eigen::Index N_p, Eigen::Index n_u) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(N_p * n_u, N_p * n_u);
  for (Eigen::Index j = 1; j < N_p; ++j)
    D.block(j * n_u, (j - 1) * n_u, n_u, n_u) = -Eigen::MatrixXd::Identity(n_u, n_u);
  return D;
}

Eigen::MatrixXd kron_identity(Eigen::Index reps, const Eigen::MatrixXd& M) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(reps * M.rows(), reps * M.cols());
  for (Eigen::Index j = 0; j < reps; ++j)
    out.block(j * M.rows(), j * M.cols(), M.rows(), M.cols()) = M;
  return out;
}

}  // namespace

Eigen::VectorXd input_scale_from_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() != hi.size())
    fail(ErrorKind::invalid_argument, "input_scale_from_bounds: bound size mismatch");
  Eigen::VectorXd s(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    double m = 0.0;
    if (std::isfinite(lo(i))) m = std::max(m, std::abs(lo(i)));
    if (std::isfinite(hi(i))) m = std::max(m, std::abs(hi(i)));
    s(i) = m > 0.0 ? m : 1.0;
  }
  return s;
}

void ControllerConfig::validate(Eigen::Index n_u) const {
  if (T_ini < 1 || N_p < 1)
    fail(ErrorKind::invalid_argument, "controller: T_ini and N_p must be >= 1");
  if (u_lo.size() != n_u || u_hi.size() != n_u)
    fail(ErrorKind::invalid_argument, "controller: input bound size mismatch");
  for (Eigen::Index i = 0; i < n_u; ++i)
    if (u_lo(i) > u_hi(i)) fail(ErrorKind::invalid_argument, "controller: u_lo > u_hi");
  if (R.rows() != n_u || R.cols() != n_u)
    fail(ErrorKind::invalid_argument, "controller: R must be n_u x n_u");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (R + R.transpose()),
                                                    Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    fail(ErrorKind::invalid_argument, "controller: R must be positive definite");
  if (!(beta > 0.0)) fail(ErrorKind::invalid_argument, "controller: beta must be > 0");
  if (lambda_g < 0.0) fail(ErrorKind::invalid_argument, "controller: lambda_g must be >= 0");
  if (yc_lo.size() != yc_hi.size())
    fail(ErrorKind::invalid_argument, "controller: yc bound size mismatch");
}

void InitWindow::push(const Eigen::VectorXd& u_new, const Eigen::VectorXd& y_new) {
  const Eigen::Index T = u.rows();
  if (T > 1) {
    u.topRows(T - 1) = u.bottomRows(T - 1).eval();
    y.topRows(T - 1) = y.bottomRows(T - 1).eval();
  }
  u.row(T - 1) = u_new.transpose();
  y.row(T - 1) = y_new.transpose();
  u_prev = u_new;
}

ControlData make_control_data(const Trajectory& hankel_traj, const LiftingModel& model,
                              Eigen::Index T_ini, Eigen::Index N_p,
                              const Eigen::VectorXd& u_scale) {
  hankel_traj.validate();
  if (u_scale.size() != hankel_traj.n_u())
    fail(ErrorKind::invalid_argument, "make_control_data: u_scale size mismatch");
  const Eigen::Index L = T_ini + N_p;

  Eigen::MatrixXd Us =
      hankel_traj.inputs.array().rowwise() / u_scale.transpose().array();
  const Eigen::MatrixXd Z = model.lift(hankel_traj.outputs);

  ControlData d;
  d.u_scale = u_scale;
  d.blocks = partition_hankel(build_hankel(Us, L), build_hankel(Z, L), T_ini, N_p);
  return d;
}

ControlData reduce_control_data(const ControlData& full, const RetentionSpec& retention) {
  const auto& b = full.blocks;
  const Eigen::Index L = b.T_ini + b.N_p;
  Eigen::MatrixXd stacked((b.n_u + b.n_z) * L, b.cols());
  stacked.topRows(b.n_u * b.T_ini) = b.U_p;
  stacked.middleRows(b.n_u * b.T_ini, b.n_u * b.N_p) = b.U_f;
  stacked.middleRows(b.n_u * L, b.n_z * b.T_ini) = b.Z_p;
  stacked.bottomRows(b.n_z * b.N_p) = b.Z_f;

  const ReducedHankel red = reduce_hankel(stacked, retention);

  ControlData d;
  d.u_scale = full.u_scale;
  d.reduced = true;
  d.n_r = red.n_r;
  d.singular_values = red.singular_values;
  d.blocks.n_u = b.n_u;
  d.blocks.n_z = b.n_z;
  d.blocks.T_ini = b.T_ini;
  d.blocks.N_p = b.N_p;
  d.blocks.U_p = red.matrix.topRows(b.n_u * b.T_ini);
  d.blocks.U_f = red.matrix.middleRows(b.n_u * b.T_ini, b.n_u * b.N_p);
  d.blocks.Z_p = red.matrix.middleRows(b.n_u * L, b.n_z * b.T_ini);
  d.blocks.Z_f = red.matrix.bottomRows(b.n_z * b.N_p);
  return d;
}

namespace {

// Step-independent pieces of the economic QP; only f, c0 and b_eq move with
// the window.
struct EconParts {
  Eigen::MatrixXd H;
  Eigen::MatrixXd A_eq;   // [U_p; Z_p]
  Eigen::MatrixXd A_box;
  Eigen::VectorXd lo, hi;
  Eigen::VectorXd f_const;
  double c0_const = 0.0;
  Eigen::MatrixXd W_uprev;  // f += W_uprev * u_prev_scaled
  Eigen::MatrixXd R_first;  // c0 += u_prev' R_first u_prev
};

EconParts make_econ_parts(const HankelBlocks& blocks, const LiftingModel& model,
                          const ControllerConfig& cfg, const Eigen::VectorXd& u_scale) {
  const Eigen::Index n_u = blocks.n_u;
  const Eigen::Index n_z = blocks.n_z;
  const Eigen::Index N_p = blocks.N_p;
  const Eigen::Index n_g = blocks.cols();
  if (model.n_z() != n_z)
    fail(ErrorKind::invalid_argument, "economic QP: model n_z disagrees with hankel blocks");
  cfg.validate(n_u);
  if (cfg.N_p != N_p || cfg.T_ini != blocks.T_ini)
    fail(ErrorKind::invalid_argument, "economic QP: horizon disagrees with hankel blocks");

  EconParts p;

  // Stage term: minimize mode keeps the surrogate as is, maximize mode negates
  // the concave profit; either way the curvature entering H is +exp(q).
  const double sgn = model.head.sign == CostSign::maximize ? -1.0 : 1.0;
  const Eigen::VectorXd obj_curv = sgn * model.head.curvature();  // = exp(q)
  const Eigen::RowVectorXd obj_P = sgn * model.head.P;
  const double obj_b = sgn * model.head.b;

  Eigen::MatrixXd Qt = kron_identity(N_p, Eigen::MatrixXd(obj_curv.asDiagonal()));
  p.H = 2.0 * cfg.beta * blocks.Z_f.transpose() * Qt * blocks.Z_f;

  const Eigen::MatrixXd D = rate_difference(N_p, n_u);
  const Eigen::MatrixXd Rt = kron_identity(N_p, cfg.R);
  const Eigen::MatrixXd DU = D * blocks.U_f;
  p.H.noalias() += 2.0 * DU.transpose() * Rt * DU;
  p.H.diagonal().array() += 2.0 * cfg.lambda_g;
  p.H = 0.5 * (p.H + p.H.transpose());  // symmetrize round-off

  Eigen::VectorXd P_stack(N_p * n_z);
  for (Eigen::Index j = 0; j < N_p; ++j) P_stack.segment(j * n_z, n_z) = obj_P.transpose();
  p.f_const = cfg.beta * blocks.Z_f.transpose() * P_stack;
  p.c0_const = cfg.beta * static_cast<double>(N_p) * obj_b;

  // u_prev enters the first rate difference only.
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(N_p * n_u, n_u);
  E.topRows(n_u) = Eigen::MatrixXd::Identity(n_u, n_u);
  p.W_uprev = -2.0 * DU.transpose() * (Rt * E);
  p.R_first = E.transpose() * Rt * E;

  p.A_eq.resize(blocks.U_p.rows() + blocks.Z_p.rows(), n_g);
  p.A_eq.topRows(blocks.U_p.rows()) = blocks.U_p;
  p.A_eq.bottomRows(blocks.Z_p.rows()) = blocks.Z_p;

  const bool with_yc = cfg.yc_lo.size() > 0;
  const Eigen::Index n_c = model.n_c();
  if (with_yc && cfg.yc_lo.size() != n_c)
    fail(ErrorKind::invalid_argument, "economic QP: yc bound size disagrees with model n_c");
  const Eigen::Index box_rows = N_p * n_u + (with_yc ? N_p * n_c : 0);
  p.A_box.resize(box_rows, n_g);
  p.lo.resize(box_rows);
  p.hi.resize(box_rows);
  p.A_box.topRows(N_p * n_u) = blocks.U_f;
  for (Eigen::Index j = 0; j < N_p; ++j) {
    p.lo.segment(j * n_u, n_u) = cfg.u_lo.cwiseQuotient(u_scale);
    p.hi.segment(j * n_u, n_u) = cfg.u_hi.cwiseQuotient(u_scale);
  }
  if (with_yc) {
    const Eigen::VectorXd lo_n = model.yc_bound_to_normalized(cfg.yc_lo);
    const Eigen::VectorXd hi_n = model.yc_bound_to_normalized(cfg.yc_hi);
    for (Eigen::Index j = 0; j < N_p; ++j) {
      p.A_box.middleRows(N_p * n_u + j * n_c, n_c) =
          model.G * blocks.Z_f.middleRows(j * n_z, n_z);
      p.lo.segment(N_p * n_u + j * n_c, n_c) = lo_n;
      p.hi.segment(N_p * n_u + j * n_c, n_c) = hi_n;
    }
  }
  return p;
}

struct WindowVectors {
  Eigen::VectorXd u_ini_scaled;  // stacked
  Eigen::VectorXd z_ini;         // stacked lifted outputs
  Eigen::VectorXd u_prev_scaled;
};

WindowVectors lift_window(const InitWindow& w, const LiftingModel& model,
                          const Eigen::VectorXd& u_scale, Eigen::Index T_ini) {
  if (w.u.rows() != T_ini || w.y.rows() != T_ini)
    fail(ErrorKind::invalid_argument, "init window length must equal T_ini");
  WindowVectors v;
  Eigen::MatrixXd us = w.u.array().rowwise() / u_scale.transpose().array();
  v.u_ini_scaled = stack_rows(us);
  v.z_ini = stack_rows(model.lift(w.y));
  v.u_prev_scaled = w.u_prev.cwiseQuotient(u_scale);
  return v;
}

}  // namespace

QpProblem build_econ_qp(const HankelBlocks& blocks, const LiftingModel& model,
                        const ControllerConfig& cfg, const Eigen::VectorXd& u_scale,
                        const InitWindow& window) {
  const EconParts parts = make_econ_parts(blocks, model, cfg, u_scale);
  const WindowVectors v = lift_window(window, model, u_scale, cfg.T_ini);

  QpProblem qp;
  qp.H = parts.H;
  qp.f = parts.f_const + parts.W_uprev * v.u_prev_scaled;
  qp.c0 = parts.c0_const + v.u_prev_scaled.dot(parts.R_first * v.u_prev_scaled);
  qp.A_eq = parts.A_eq;
  qp.b_eq.resize(v.u_ini_scaled.size() + v.z_ini.size());
  qp.b_eq << v.u_ini_scaled, v.z_ini;
  qp.A_box = parts.A_box;
  qp.lo = parts.lo;
  qp.hi = parts.hi;
  return qp;
}

QpProblem build_tracking_qp(const HankelBlocks& blocks, const TrackingObjective& obj,
                            const ControllerConfig& cfg, const Eigen::VectorXd& u_scale,
                            const InitWindow& window,
                            const Eigen::VectorXd& y_lo, const Eigen::VectorXd& y_hi) {
  const Eigen::Index n_u = blocks.n_u;
  const Eigen::Index n_y = blocks.n_z;  // tracking blocks carry raw outputs
  const Eigen::Index N_p = blocks.N_p;
  const Eigen::Index n_g = blocks.cols();
  cfg.validate(n_u);
  if (obj.Q.rows() != n_y * N_p || obj.Q.cols() != n_y * N_p)
    fail(ErrorKind::invalid_argument, "tracking QP: Q must be (n_y*N_p)^2");
  if (obj.R.rows() != n_u * N_p || obj.R.cols() != n_u * N_p)
    fail(ErrorKind::invalid_argument, "tracking QP: R must be (n_u*N_p)^2");
  if (obj.y_ref.size() != n_y * N_p || obj.u_ref.size() != n_u * N_p)
    fail(ErrorKind::invalid_argument, "tracking QP: reference length mismatch");

  // U_f is in scaled units; map the physical input cost through the scaling.
  Eigen::VectorXd s_stack(N_p * n_u);
  for (Eigen::Index j = 0; j < N_p; ++j) s_stack.segment(j * n_u, n_u) = u_scale;
  const Eigen::MatrixXd SU = s_stack.asDiagonal() * blocks.U_f;

  QpProblem qp;
  qp.H = 2.0 * (blocks.Z_f.transpose() * obj.Q * blocks.Z_f + SU.transpose() * obj.R * SU);
  qp.H.diagonal().array() += 2.0 * cfg.lambda_g;
  qp.H = 0.5 * (qp.H + qp.H.transpose());
  qp.f = -2.0 * (blocks.Z_f.transpose() * (obj.Q * obj.y_ref) +
                 SU.transpose() * (obj.R * obj.u_ref));
  qp.c0 = obj.y_ref.dot(obj.Q * obj.y_ref) + obj.u_ref.dot(obj.R * obj.u_ref);

  const LiftingModel id = LiftingModel::identity(n_y);
  const WindowVectors v = lift_window(window, id, u_scale, cfg.T_ini);
  qp.A_eq.resize(blocks.U_p.rows() + blocks.Z_p.rows(), n_g);
  qp.A_eq.topRows(blocks.U_p.rows()) = blocks.U_p;
  qp.A_eq.bottomRows(blocks.Z_p.rows()) = blocks.Z_p;
  qp.b_eq.resize(v.u_ini_scaled.size() + v.z_ini.size());
  qp.b_eq << v.u_ini_scaled, v.z_ini;

  const bool with_y = y_lo.size() > 0;
  if (with_y && (y_lo.size() != n_y || y_hi.size() != n_y))
    fail(ErrorKind::invalid_argument, "tracking QP: output bound size mismatch");
  const Eigen::Index box_rows = N_p * n_u + (with_y ? N_p * n_y : 0);
  qp.A_box.resize(box_rows, n_g);
  qp.lo.resize(box_rows);
  qp.hi.resize(box_rows);
  qp.A_box.topRows(N_p * n_u) = blocks.U_f;
  for (Eigen::Index j = 0; j < N_p; ++j) {
    qp.lo.segment(j * n_u, n_u) = cfg.u_lo.cwiseQuotient(u_scale);
    qp.hi.segment(j * n_u, n_u) = cfg.u_hi.cwiseQuotient(u_scale);
  }
  if (with_y) {
    qp.A_box.bottomRows(N_p * n_y) = blocks.Z_f;
    for (Eigen::Index j = 0; j < N_p; ++j) {
      qp.lo.segment(N_p * n_u + j * n_y, n_y) = y_lo;
      qp.hi.segment(N_p * n_u + j * n_y, n_y) = y_hi;
    }
  }
  return qp;
}

ExtractedInput extract_input(const QpSolution& solution, const Eigen::MatrixXd& U_f,
                             const Eigen::VectorXd& u_scale, const Eigen::VectorXd& u_lo,
                             const Eigen::VectorXd& u_hi) {
  if (solution.status == QpStatus::infeasible)
    fail(ErrorKind::numeric,
         std::string("extract_input: solver reported infeasible (primal residual ") +
             format_double(solution.primal_residual) + ")");
  if (!solution.x.allFinite())
    fail(ErrorKind::numeric, "extract_input: non-finite iterate");

  const Eigen::Index n_u = u_scale.size();
  const Eigen::VectorXd u_stack = U_f * solution.x;
  const Eigen::Index N_p = u_stack.size() / n_u;

  ExtractedInput out;
  out.sequence.resize(N_p, n_u);
  for (Eigen::Index j = 0; j < N_p; ++j)
    out.sequence.row(j) = (u_stack.segment(j * n_u, n_u).cwiseProduct(u_scale)).transpose();
  out.first = out.sequence.row(0).transpose();
  for (Eigen::Index i = 0; i < n_u; ++i) {
    if (out.first(i) < u_lo(i)) { out.first(i) = u_lo(i); out.clamped = true; }
    if (out.first(i) > u_hi(i)) { out.first(i) = u_hi(i); out.clamped = true; }
  }
  return out;
}

// --- EconDeepcController -----------------------------------------------------

EconDeepcController::EconDeepcController(const ControlData& data, const LiftingModel& model,
                                         ControllerConfig cfg)
    : data_(data), model_(model), cfg_(std::move(cfg)) {
  model_.validate();
  EconParts parts = make_econ_parts(data_.blocks, model_, cfg_, data_.u_scale);
  W_uprev_ = parts.W_uprev;
  EtRE_ = parts.R_first;
  f_econ_const_ = parts.f_const;
  c0_const_ = parts.c0_const;

  QpProblem qp;
  qp.H = std::move(parts.H);
  qp.f = Eigen::VectorXd::Zero(data_.blocks.cols());
  qp.A_eq = std::move(parts.A_eq);
  qp.b_eq = Eigen::VectorXd::Zero(qp.A_eq.rows());
  qp.A_box = std::move(parts.A_box);
  qp.lo = std::move(parts.lo);
  qp.hi = std::move(parts.hi);
  solver_ = std::make_unique<QpSolver>(std::move(qp), cfg_.qp);
}

IController::StepResult EconDeepcController::solve_step(const InitWindow& window, bool soft) {
  const auto t0 = std::chrono::steady_clock::now();
  const WindowVectors v = lift_window(window, model_, data_.u_scale, cfg_.T_ini);
  const Eigen::Index m_u = data_.blocks.U_p.rows();
  const Eigen::Index m_z = data_.blocks.Z_p.rows();

  Eigen::VectorXd f = f_econ_const_ + W_uprev_ * v.u_prev_scaled;
  double c0 = c0_const_ + v.u_prev_scaled.dot(EtRE_ * v.u_prev_scaled);

  QpSolution sol;
  if (!soft) {
    Eigen::VectorXd b_eq(m_u + m_z);
    b_eq << v.u_ini_scaled, v.z_ini;
    solver_->set_equality_rhs(b_eq);
    solver_->set_linear_cost(f, c0);
    sol = warm_ ? solver_->solve_warm() : solver_->solve();
  } else {
    if (!soft_solver_) {
      const QpProblem& hard = solver_->problem();
      QpProblem qp;
      qp.H = hard.H + 2.0 * cfg_.soft_init_penalty * data_.blocks.Z_p.transpose() * data_.blocks.Z_p;
      qp.H = 0.5 * (qp.H + qp.H.transpose());
      qp.f = Eigen::VectorXd::Zero(hard.n());
      qp.A_eq = data_.blocks.U_p;
      qp.b_eq = Eigen::VectorXd::Zero(m_u);
      qp.A_box = hard.A_box;
      qp.lo = hard.lo;
      qp.hi = hard.hi;
      soft_solver_ = std::make_unique<QpSolver>(std::move(qp), cfg_.qp);
      soft_zp_term_ = -2.0 * cfg_.soft_init_penalty * data_.blocks.Z_p.transpose();
    }
    f += soft_zp_term_ * v.z_ini;
    c0 += cfg_.soft_init_penalty * v.z_ini.squaredNorm();
    soft_solver_->set_equality_rhs(v.u_ini_scaled);
    soft_solver_->set_linear_cost(f, c0);
    sol = soft_solver_->solve();
  }

  StepResult r;
  r.status = sol.status;
  r.iterations = sol.iterations;
  r.objective = sol.objective;
  r.soft_init = soft;

  const bool usable =
      sol.status == QpStatus::optimal ||
      (sol.status == QpStatus::max_iterations && sol.x.allFinite() &&
       sol.primal_residual <= 100.0 * cfg_.qp.tol_primal &&
       sol.dual_residual <= 100.0 * cfg_.qp.tol_dual);
  if (!usable) {
    r.fallback = true;
    r.u_apply = window.u_prev;
    r.u_seq.resize(0, n_u());
    r.solve_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

  if (!soft) warm_ = true;
  const ExtractedInput ex =
      extract_input(sol, data_.blocks.U_f, data_.u_scale, cfg_.u_lo, cfg_.u_hi);
  r.u_apply = ex.first;
  r.u_seq = ex.sequence;

  if (cfg_.yc_lo.size() > 0 && sol.status == QpStatus::optimal) {
    const Eigen::VectorXd lo_n = model_.yc_bound_to_normalized(cfg_.yc_lo);
    const Eigen::VectorXd hi_n = model_.yc_bound_to_normalized(cfg_.yc_hi);
    const Eigen::VectorXd z_pred = data_.blocks.Z_f * sol.x;
    double viol = 0.0;
    for (Eigen::Index j = 0; j < cfg_.N_p; ++j) {
      const Eigen::VectorXd yc = model_.G * z_pred.segment(j * model_.n_z(), model_.n_z());
      for (Eigen::Index i = 0; i < yc.size(); ++i) {
        if (std::isfinite(lo_n(i))) viol = std::max(viol, lo_n(i) - yc(i));
        if (std::isfinite(hi_n(i))) viol = std::max(viol, yc(i) - hi_n(i));
      }
    }
    r.yc_violation = viol;
  }
  r.solve_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

IController::StepResult EconDeepcController::step(const InitWindow& window) {
  const bool soft = request_soft_;
  request_soft_ = false;
  StepResult r;
  try {
    r = solve_step(window, soft);
  } catch (const Error&) {
    r = StepResult{};
    r.fallback = true;
    r.u_apply = window.u_prev;
    r.status = QpStatus::infeasible;
  }
  if (r.fallback) request_soft_ = true;
  return r;
}

// --- TrackingDeepcController -------------------------------------------------

TrackingDeepcController::TrackingDeepcController(const ControlData& data,
                                                 TrackingObjective objective,
                                                 ControllerConfig cfg,
                                                 Eigen::VectorXd y_lo, Eigen::VectorXd y_hi)
    : data_(data), obj_(std::move(objective)), cfg_(std::move(cfg)),
      y_lo_(std::move(y_lo)), y_hi_(std::move(y_hi)) {
  // Assemble once via the shared builder to validate shapes, then keep the
  // solver and refresh only f and b_eq per step.
  InitWindow w0;
  w0.u = Eigen::MatrixXd::Zero(cfg_.T_ini, data_.blocks.n_u);
  w0.y = Eigen::MatrixXd::Zero(cfg_.T_ini, data_.blocks.n_z);
  w0.u_prev = Eigen::VectorXd::Zero(data_.blocks.n_u);
  QpProblem qp = build_tracking_qp(data_.blocks, obj_, cfg_, data_.u_scale, w0, y_lo_, y_hi_);

  Eigen::VectorXd s_stack(cfg_.N_p * data_.blocks.n_u);
  for (Eigen::Index j = 0; j < cfg_.N_p; ++j)
    s_stack.segment(j * data_.blocks.n_u, data_.blocks.n_u) = data_.u_scale;
  YfTQ_ = data_.blocks.Z_f.transpose() * obj_.Q;
  UfTSR_ = (s_stack.asDiagonal() * data_.blocks.U_f).transpose() * obj_.R;
  solver_ = std::make_unique<QpSolver>(std::move(qp), cfg_.qp);
}

void TrackingDeepcController::set_reference(const Eigen::VectorXd& y_ref,
                                            const Eigen::VectorXd& u_ref) {
  if (y_ref.size() != obj_.y_ref.size() || u_ref.size() != obj_.u_ref.size())
    fail(ErrorKind::invalid_argument, "set_reference: length mismatch");
  obj_.y_ref = y_ref;
  obj_.u_ref = u_ref;
}

IController::StepResult TrackingDeepcController::step(const InitWindow& window) {
  const auto t0 = std::chrono::steady_clock::now();
  StepResult r;
  try {
    if (window.u.rows() != cfg_.T_ini || window.y.rows() != cfg_.T_ini)
      fail(ErrorKind::invalid_argument, "init window length must equal T_ini");
    Eigen::MatrixXd us = window.u.array().rowwise() / data_.u_scale.transpose().array();
    Eigen::VectorXd b_eq(us.size() + window.y.size());
    b_eq << stack_rows(us), stack_rows(window.y);
    solver_->set_equality_rhs(b_eq);
    solver_->set_linear_cost(-2.0 * (YfTQ_ * obj_.y_ref + UfTSR_ * obj_.u_ref),
                             obj_.y_ref.dot(obj_.Q * obj_.y_ref) +
                                 obj_.u_ref.dot(obj_.R * obj_.u_ref));
    const QpSolution sol = warm_ ? solver_->solve_warm() : solver_->solve();
    r.status = sol.status;
    r.iterations = sol.iterations;
    r.objective = sol.objective;
    if (sol.status == QpStatus::infeasible || !sol.x.allFinite()) {
      r.fallback = true;
      r.u_apply = window.u_prev;
    } else {
      warm_ = true;
      const ExtractedInput ex =
          extract_input(sol, data_.blocks.U_f, data_.u_scale, cfg_.u_lo, cfg_.u_hi);
      r.u_apply = ex.first;
      r.u_seq = ex.sequence;
    }
  } catch (const Error&) {
    r.fallback = true;
    r.u_apply = window.u_prev;
    r.status = QpStatus::infeasible;
  }
  r.solve_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

IController::StepResult ConstantController::step(const InitWindow&) {
  StepResult r;
  r.u_apply = u_;
  r.u_seq = u_.transpose().replicate(N_p_, 1);
  return r;
}

// --- Closed loop --------------------------------------------------------------

SimResult run_closed_loop(PlantSim& plant, IController& controller,
                          const ClosedLoopOptions& options) {
  if (options.steps < 1) fail(ErrorKind::invalid_argument, "closed loop: steps must be >= 1");
  if (options.warmup_input.size() != plant.n_u())
    fail(ErrorKind::invalid_argument, "closed loop: warmup input size mismatch");

  plant.reset(options.seed);

  InitWindow window;
  window.u.resize(options.T_ini, plant.n_u());
  window.y.resize(options.T_ini, plant.n_y());
  for (Eigen::Index k = 0; k < options.T_ini; ++k) {
    const Eigen::VectorXd y = plant.output();
    window.u.row(k) = options.warmup_input.transpose();
    window.y.row(k) = y.transpose();
    plant.apply(options.warmup_input);
  }
  window.u_prev = options.warmup_input;

  SimResult res;
  res.seed = options.seed;
  res.dt = plant.dt();
  res.records.reserve(static_cast<std::size_t>(options.steps));

  double profit_sum = 0.0;
  for (int k = 0; k < options.steps; ++k) {
    StepRecord rec;
    rec.t = static_cast<double>(k) * plant.dt();
    rec.x = plant.state();
    rec.y = plant.output();

    const IController::StepResult sr = controller.step(window);
    rec.u = sr.u_apply;
    rec.objective = sr.objective;
    rec.status = sr.status;
    rec.iterations = sr.iterations;
    rec.solve_time_s = sr.solve_time_s;
    rec.fallback = sr.fallback;
    rec.yc_violation = sr.yc_violation;
    if (sr.fallback) ++res.n_fallbacks;
    res.total_solve_s += sr.solve_time_s;

    rec.profit = plant.stage_value(rec.u, rec.y);
    profit_sum += rec.profit;

    plant.apply(rec.u);
    window.push(rec.u, rec.y);
    res.records.push_back(std::move(rec));
  }
  res.avg_profit = profit_sum / static_cast<double>(options.steps);
  res.n_clamped = plant.n_clamped();
  return res;
}

// --- SimResult persistence -----------------------------------------------------

void save_sim_result(const SimResult& result, const std::string& path) {
  std::ostringstream os;
  os << "# econdeepc-simresult v1\n";
  os << "# mode " << (result.mode.empty() ? "-" : result.mode) << '\n';
  os << "# label " << (result.label.empty() ? "-" : result.label) << '\n';
  os << "# seed " << result.seed << '\n';
  os << "# dt " << format_double(result.dt) << '\n';
  os << "# avg_profit " << format_double(result.avg_profit) << '\n';
  os << "# total_solve_s " << format_double(result.total_solve_s) << '\n';
  os << "# n_fallbacks " << result.n_fallbacks << '\n';
  os << "# n_clamped " << result.n_clamped << '\n';

  const Eigen::Index n_x = result.records.empty() ? 0 : result.records.front().x.size();
  const Eigen::Index n_y = result.records.empty() ? 0 : result.records.front().y.size();
  const Eigen::Index n_u = result.records.empty() ? 0 : result.records.front().u.size();
  os << "step,t";
  for (Eigen::Index i = 0; i < n_x; ++i) os << ",x" << i;
  for (Eigen::Index i = 0; i < n_y; ++i) os << ",y" << i;
  for (Eigen::Index i = 0; i < n_u; ++i) os << ",u" << i;
  os << ",profit,objective,status,iterations,solve_ms,fallback,yc_violation\n";
  for (std::size_t k = 0; k < result.records.size(); ++k) {
    const StepRecord& r = result.records[k];
    os << k << ',' << format_double(r.t);
    for (Eigen::Index i = 0; i < n_x; ++i) os << ',' << format_double(r.x(i));
    for (Eigen::Index i = 0; i < n_y; ++i) os << ',' << format_double(r.y(i));
    for (Eigen::Index i = 0; i < n_u; ++i) os << ',' << format_double(r.u(i));
    os << ',' << format_double(r.profit) << ',' << format_double(r.objective) << ','
       << to_string(r.status) << ',' << r.iterations << ','
       << format_double(r.solve_time_s * 1e3) << ',' << (r.fallback ? 1 : 0) << ','
       << format_double(r.yc_violation) << '\n';
  }
  write_text_file(path, os.str());
}

SimResult load_sim_result(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  int lineno = 0;
  SimResult res;
  Eigen::Index n_x = 0, n_y = 0, n_u = 0;
  bool header_seen = false, magic_seen = false;

  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (t[0] == '#') {
      std::istringstream ms(t.substr(1));
      std::string key;
      ms >> key;
      std::string val;
      std::getline(ms, val);
      val = trim(val);
      if (key == "econdeepc-simresult") magic_seen = true;
      else if (key == "mode") res.mode = val == "-" ? "" : val;
      else if (key == "label") res.label = val == "-" ? "" : val;
      else if (key == "seed") res.seed = static_cast<std::uint64_t>(parse_int(val, ctx));
      else if (key == "dt") res.dt = parse_double(val, ctx);
      else if (key == "avg_profit") res.avg_profit = parse_double(val, ctx);
      else if (key == "total_solve_s") res.total_solve_s = parse_double(val, ctx);
      else if (key == "n_fallbacks") res.n_fallbacks = static_cast<int>(parse_int(val, ctx));
      else if (key == "n_clamped") res.n_clamped = parse_int(val, ctx);
      continue;
    }
    if (!header_seen) {
      if (!magic_seen) fail(ErrorKind::parse, path + ": not a simresult file");
      for (const auto& f : split_fields(t, ',')) {
        const std::string name = trim(f);
        if (name.rfind('x', 0) == 0 && name.size() > 1 && std::isdigit(name[1])) ++n_x;
        else if (name.rfind('y', 0) == 0 && name.size() > 1 && std::isdigit(name[1])) ++n_y;
        else if (name.rfind('u', 0) == 0 && name.size() > 1 && std::isdigit(name[1])) ++n_u;
      }
      header_seen = true;
      continue;
    }
    const auto f = split_fields(t, ',');
    const Eigen::Index expected = 2 + n_x + n_y + n_u + 7;
    if (static_cast<Eigen::Index>(f.size()) != expected)
      fail(ErrorKind::parse, ctx + ": wrong field count");
    StepRecord r;
    Eigen::Index at = 1;
    r.t = parse_double(f[at++], ctx);
    r.x.resize(n_x);
    for (Eigen::Index i = 0; i < n_x; ++i) r.x(i) = parse_double(f[at++], ctx);
    r.y.resize(n_y);
    for (Eigen::Index i = 0; i < n_y; ++i) r.y(i) = parse_double(f[at++], ctx);
    r.u.resize(n_u);
    for (Eigen::Index i = 0; i < n_u; ++i) r.u(i) = parse_double(f[at++], ctx);
    r.profit = parse_double(f[at++], ctx);
    r.objective = parse_double(f[at++], ctx);
    const std::string status = trim(f[at++]);
    r.status = status == "optimal" ? QpStatus::optimal
               : status == "infeasible" ? QpStatus::infeasible
                                        : QpStatus::max_iterations;
    r.iterations = static_cast<int>(parse_int(f[at++], ctx));
    r.solve_time_s = parse_double(f[at++], ctx) / 1e3;
    r.fallback = parse_int(f[at++], ctx) != 0;
    r.yc_violation = parse_double(f[at++], ctx);
    res.records.push_back(std::move(r));
  }
  if (!header_seen) fail(ErrorKind::parse, path + ": no data rows");
  return res;
}

}  // namespace econdeepc
