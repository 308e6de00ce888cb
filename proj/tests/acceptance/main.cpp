// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy experiment state (criterion 8) is shared with criteria 9/10.
//
// Usage: econdeepc_acceptance [--work-dir DIR] [--only N [--only M ...]]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "econdeepc/config.hpp"
#include "econdeepc/controller.hpp"
#include "econdeepc/dataset.hpp"
#include "econdeepc/gradcheck.hpp"
#include "econdeepc/io.hpp"
#include "econdeepc/pipeline.hpp"
#include "econdeepc/train.hpp"

#include "../oracles.hpp"

#ifndef ECONDEEPC_CONFIG_DIR
#define ECONDEEPC_CONFIG_DIR "configs"
#endif

using namespace econdeepc;
namespace fs = std::filesystem;

namespace {

struct InputLog {
  Eigen::MatrixXd u;  // one row per applied input
  Eigen::VectorXd lo, hi;
  std::string origin;
};

struct CaseOutputs {
  std::string dataset_dir, model_path, econ_dir, const_dir;
  double econ_mean = 0.0, const_mean = 0.0;
};

struct Context {
  std::string work_dir;
  std::vector<InputLog> input_logs;
  std::vector<std::string> cstr_result_files;  // per-seed econ results (yc configured)
  CaseOutputs case1, case2;
  std::string eval_dir, summary_txt, summary_csv;
  bool case_study_ran = false;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

Eigen::MatrixXd random_inputs(Rng& rng, Eigen::Index T, Eigen::Index n_u, double amp) {
  Eigen::MatrixXd U(T, n_u);
  for (Eigen::Index k = 0; k < T; ++k)
    for (Eigen::Index i = 0; i < n_u; ++i) U(k, i) = rng.uniform(-amp, amp);
  return U;
}

Eigen::MatrixXd roll_outputs(const LtiSystem& sys, const Eigen::MatrixXd& U) {
  Eigen::MatrixXd Y(U.rows(), sys.n_y());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n_x());
  for (Eigen::Index k = 0; k < U.rows(); ++k) {
    auto [xn, y] = lti_step(sys, x, U.row(k).transpose());
    Y.row(k) = y.transpose();
    x = xn;
  }
  return Y;
}

// --- criterion 1: fundamental lemma --------------------------------------

Outcome criterion1(Context&) {
  Rng rng(1001);
  double worst = 0.0;
  for (Eigen::Index n_x : {2, 3, 4}) {
    const Eigen::Index n_u = 2, n_y = 2, L = 7, T = 60 + 40 * n_x;
    const LtiSystem sys = random_controllable_lti(n_x, n_u, n_y, rng);
    const Eigen::MatrixXd U = random_inputs(rng, T, n_u, 1.0);
    if (!is_persistently_exciting(U, L + n_x).exciting)
      return {false, "excitation unexpectedly degenerate"};
    const Eigen::MatrixXd Y = roll_outputs(sys, U);

    Eigen::MatrixXd H(n_u * L + n_y * L, T - L + 1);
    H << build_hankel(U, L).data, build_hankel(Y, L).data;
    const Eigen::MatrixXd Hp = pseudo_inverse(H);

    for (int trial = 0; trial < 8; ++trial) {
      Eigen::VectorXd x(n_x);
      for (Eigen::Index i = 0; i < n_x; ++i) x(i) = rng.uniform(-1, 1);
      Eigen::VectorXd rhs(n_u * L + n_y * L);
      for (Eigen::Index k = 0; k < L; ++k) {
        Eigen::VectorXd u(n_u);
        for (Eigen::Index i = 0; i < n_u; ++i) u(i) = rng.uniform(-1, 1);
        auto [xn, y] = lti_step(sys, x, u);
        rhs.segment(k * n_u, n_u) = u;
        rhs.segment(n_u * L + k * n_y, n_y) = y;
        x = xn;
      }
      const double res = (H * (Hp * rhs) - rhs).norm() / rhs.norm();
      worst = std::max(worst, res);
    }
  }
  std::ostringstream os;
  os << "worst relative residual " << format_double(worst) << " (tol 1e-8)";
  return {worst <= 1e-8, os.str()};
}

// --- criterion 2: gradient check ------------------------------------------

struct Criterion2Setup {
  Dataset ds;
  TrainingData data;
  LiftingModel model;
  std::vector<int> batch;
};

Criterion2Setup gradcheck_setup(std::uint64_t seed) {
  Criterion2Setup s;
  Rng rng(seed);
  const LtiSystem sys = random_controllable_lti(4, 2, 4, rng);
  auto stage = [](const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
    return y.squaredNorm() + 0.2 * u(1);
  };
  LtiPlantSim plant(sys, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Constant(2, -2.0),
                    Eigen::VectorXd::Constant(2, 2.0), 0.1, stage);
  s.ds = generate(plant, 60, 140, 7, seed);
  split(s.ds, 7, 2, 1, seed + 1);
  s.data = prepare_training_data(s.ds, {0, 1, 2, 3}, Eigen::VectorXd::Constant(2, 2.0));

  TrainConfig cfg;
  cfg.n_z = 5;
  cfg.hidden_width = 24;
  cfg.hidden_layers = 2;
  cfg.seed = seed;
  s.model = init_model(s.data, cfg);
  Rng hr(seed + 3);
  for (Eigen::Index i = 0; i < 5; ++i) {
    s.model.head.q(i) = hr.uniform(-0.5, 0.5);
    s.model.head.P(i) = hr.uniform(-1, 1);
  }
  s.model.head.b = 0.2;
  s.batch.assign(s.data.train_idx.begin(), s.data.train_idx.begin() + 10);
  return s;
}

// Flat index of incoming weight (row, col) of layer l in the model's
// parameter ordering.
Eigen::Index weight_flat_index(const LiftingModel& m, std::size_t layer, Eigen::Index row,
                               Eigen::Index col) {
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < layer; ++k)
    at += m.net.layers()[k].W.size() + m.net.layers()[k].b.size();
  return at + col * m.net.layers()[layer].W.rows() + row;  // column-major
}

Outcome criterion2(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  Criterion2Setup s = gradcheck_setup(2002);

  // Part A: 100 random coordinates on the full composite loss.
  const GradCheckReport full =
      finite_difference_check(s.model, s.data, s.batch, {1, 1, 1}, 100, 4242);
  if (full.max_rel_err > 1e-4) {
    std::ostringstream os;
    os << "composite max rel err " << format_double(full.max_rel_err) << " at "
       << full.worst_param;
    return {false, os.str()};
  }

  // Part B: coordinates whose only gradient path is the lemma term's Hankel
  // matrix. Retune first-layer biases so a few hidden units fire on some
  // Hankel-trajectory rows but on no batch-window row; with weights (0,0,1)
  // their incoming weights then receive gradient exclusively through H_L(z_T).
  const Eigen::Index T = s.data.T();
  const Eigen::Index L = s.data.L;
  Eigen::MatrixXd Y(T + static_cast<Eigen::Index>(s.batch.size()) * L, 4);
  Y.topRows(T) = s.data.Y_T;
  for (std::size_t b = 0; b < s.batch.size(); ++b)
    Y.middleRows(T + static_cast<Eigen::Index>(b) * L, L) =
        s.data.windows[static_cast<std::size_t>(s.batch[b])].Y;
  Mlp::Trace trace;
  s.model.net.forward(s.model.normalize_y(Y), trace);

  // Aim a first-layer unit at a Hankel-trajectory row that is extreme in its
  // own direction: w = y*, active iff w.y > threshold, with the threshold set
  // between the largest window projection and ||y*||^2.
  const Eigen::MatrixXd Yn = s.model.normalize_y(Y);
  std::vector<std::pair<std::size_t, Eigen::Index>> units;  // (layer 0, unit)
  {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(T));
    for (Eigen::Index i = 0; i < T; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return Yn.row(a).squaredNorm() > Yn.row(b).squaredNorm();
    });
    Eigen::Index next_unit = 0;
    for (Eigen::Index cand : order) {
      if (next_unit >= 3) break;
      const Eigen::RowVectorXd w = Yn.row(cand);
      const double own = w.squaredNorm();
      double m_W = -std::numeric_limits<double>::infinity();
      for (Eigen::Index r = T; r < Yn.rows(); ++r) m_W = std::max(m_W, w.dot(Yn.row(r)));
      if (own > m_W + 0.05 * std::max(1.0, own)) {
        s.model.net.layers()[0].W.row(next_unit) = w;
        s.model.net.layers()[0].b(next_unit) = -(m_W + 0.4 * (own - m_W));
        units.emplace_back(0, next_unit);
        ++next_unit;
      }
    }
  }
  if (units.empty()) return {false, "no separable hidden unit found (adjust probe seed)"};
  {
    // Confirm the construction after the bias shift.
    Mlp::Trace check;
    s.model.net.forward(s.model.normalize_y(Y), check);
    for (const auto& [l, u] : units) {
      if (!(check.pre[l].col(u).head(T).array() > 0.0).any())
        return {false, "constructed unit inactive on the hankel trajectory"};
      if ((check.pre[l].col(u).tail(Y.rows() - T).array() > 0.0).any())
        return {false, "constructed unit still active on a window row"};
    }
  }

  ModelGrads grads = grads_shape(s.model);
  const LossWeights w_lin{0, 0, 1};
  compute_loss(s.model, s.data, s.batch, w_lin, &grads);
  LiftingModel probe = s.model;
  double worst = 0.0;
  int checked = 0;
  for (const auto& [layer, unit] : units) {
    for (Eigen::Index col = 0; col < s.model.net.layers()[layer].W.cols() && checked < 24;
         ++col) {
      const Eigen::Index idx = weight_flat_index(s.model, layer, unit, col);
      const double theta = get_param(s.model, idx);
      const double h = 1e-5 * (1.0 + std::abs(theta));
      auto eval = [&](double d) {
        add_to_param(probe, idx, d);
        const double v = compute_loss(probe, s.data, s.batch, w_lin, nullptr).total;
        add_to_param(probe, idx, -d);
        return v;
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      const double fd2 = (eval(h / 2) - eval(-h / 2)) / h;
      if (std::abs(fd - fd2) > 1e-3 * std::max(1.0, std::abs(fd))) continue;  // kink
      const double g = get_grad(grads, idx);
      if (std::abs(fd) < 1e-12 && std::abs(g) < 1e-12) continue;  // unit never active
      worst = std::max(worst, std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-10}));
      ++checked;
    }
  }
  if (checked == 0) return {false, "hankel-only coordinates all sat on kinks"};

  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << "composite max rel err " << format_double(full.max_rel_err) << " over "
     << full.n_checked << " coords; hankel-path max rel err " << format_double(worst) << " over "
     << checked << " coords (" << format_double(dt) << " s)";
  return {full.max_rel_err <= 1e-4 && worst <= 1e-4 && dt < 30.0, os.str()};
}

// --- criterion 3: QP oracle equivalence -----------------------------------

Outcome criterion3(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(3003);
  double worst_obj = 0.0, worst_kkt = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.raw() % 21);  // 10..30
    const QpProblem p = oracles::random_strict_qp(rng, n, 5, 10);
    const QpSolution s = solve_qp(p);
    if (s.status != QpStatus::optimal) return {false, "solver failed on a random PSD problem"};
    const Eigen::VectorXd x_pg = oracles::projected_gradient_solve(p);
    const double f_pg = p.objective(x_pg);
    worst_obj = std::max(worst_obj,
                         std::abs(s.objective - f_pg) / std::max(1.0, std::abs(f_pg)));
    worst_kkt = std::max({worst_kkt, s.primal_residual, s.comp_slackness});
    const double dual_scale = std::max(1.0, p.f.cwiseAbs().maxCoeff());
    worst_kkt = std::max(worst_kkt, s.dual_residual / dual_scale);
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << "worst objective gap " << format_double(worst_obj) << ", worst KKT residual "
     << format_double(worst_kkt) << " over 50 problems (" << format_double(dt) << " s)";
  return {worst_obj <= 1e-6 && worst_kkt <= 1e-6 && dt < 30.0, os.str()};
}

// --- criteria 4-6 share the LTI closed-loop setup ---------------------------

struct LtiLoop {
  LtiSystem sys;
  Trajectory data;
  Eigen::VectorXd u_ss, y_ss;
};

LtiLoop make_lti_loop(std::uint64_t seed, Eigen::Index T) {
  Rng rng(seed);
  LtiLoop s;
  s.sys = random_controllable_lti(3, 2, 2, rng);
  const Eigen::MatrixXd U = random_inputs(rng, T, 2, 1.0);
  s.data.dt = 0.1;
  s.data.inputs = U;
  s.data.outputs = roll_outputs(s.sys, U);
  s.data.costs = Eigen::VectorXd::Zero(T);
  s.u_ss = Eigen::Vector2d(0.4, -0.3);
  const Eigen::VectorXd x_ss =
      (Eigen::MatrixXd::Identity(3, 3) - s.sys.A).lu().solve(s.sys.B * s.u_ss);
  s.y_ss = s.sys.C * x_ss;
  return s;
}

ControllerConfig lti_cfg(Eigen::Index T_ini, Eigen::Index N_p, double box) {
  ControllerConfig cfg;
  cfg.T_ini = T_ini;
  cfg.N_p = N_p;
  cfg.u_lo = Eigen::VectorXd::Constant(2, -box);
  cfg.u_hi = Eigen::VectorXd::Constant(2, box);
  cfg.R = 0.05 * Eigen::MatrixXd::Identity(2, 2);
  cfg.lambda_g = 0.0;
  cfg.qp.tol_primal = cfg.qp.tol_dual = 1e-10;
  cfg.qp.max_iters = 200000;
  return cfg;
}

Outcome criterion4(Context& ctx) {
  const LtiLoop s = make_lti_loop(4004, 120);
  const Eigen::Index T_ini = 3, N_p = 8;
  ControllerConfig cfg = lti_cfg(T_ini, N_p, 10.0);

  const LiftingModel id = LiftingModel::identity(2);
  const Eigen::VectorXd u_scale = input_scale_from_bounds(cfg.u_lo, cfg.u_hi);
  const ControlData data = make_control_data(s.data, id, T_ini, N_p, u_scale);

  TrackingObjective obj;
  obj.Q = Eigen::MatrixXd::Identity(2 * N_p, 2 * N_p);
  obj.R = 0.01 * Eigen::MatrixXd::Identity(2 * N_p, 2 * N_p);
  obj.y_ref = s.y_ss.replicate(N_p, 1);
  obj.u_ref = s.u_ss.replicate(N_p, 1);

  TrackingDeepcController ctrl(data, obj, cfg);
  LtiPlantSim plant(s.sys, Eigen::VectorXd::Constant(3, 0.5), cfg.u_lo, cfg.u_hi, 0.1, nullptr);
  ClosedLoopOptions opts;
  opts.steps = 220;
  opts.seed = 0;
  opts.T_ini = T_ini;
  opts.warmup_input = Eigen::VectorXd::Zero(2);
  const SimResult res = run_closed_loop(plant, ctrl, opts);

  InputLog log;
  log.u.resize(static_cast<Eigen::Index>(res.records.size()), 2);
  for (std::size_t k = 0; k < res.records.size(); ++k)
    log.u.row(static_cast<Eigen::Index>(k)) = res.records[k].u.transpose();
  log.lo = cfg.u_lo;
  log.hi = cfg.u_hi;
  log.origin = "criterion-4 tracking loop";
  ctx.input_logs.push_back(std::move(log));

  const double err = (res.records.back().y - s.y_ss).norm();
  std::ostringstream os;
  os << "steady output error " << format_double(err) << " after " << opts.steps
     << " steps (tol 1e-6), fallbacks " << res.n_fallbacks;
  return {err <= 1e-6 && res.n_fallbacks == 0, os.str()};
}

Outcome criterion5(Context& ctx) {
  const LtiLoop s = make_lti_loop(5005, 120);
  const Eigen::Index T_ini = 2, N_p = 5;
  ControllerConfig cfg = lti_cfg(T_ini, N_p, std::numeric_limits<double>::infinity());

  const Eigen::VectorXd u_scale = input_scale_from_bounds(cfg.u_lo, cfg.u_hi);
  const Eigen::Vector2d q0(0.7, 1.3);
  LiftingModel econ_model = LiftingModel::identity(2, CostSign::minimize);
  econ_model.head.q = q0.array().log().matrix();
  econ_model.head.P = -2.0 * (q0.asDiagonal() * s.y_ss).transpose();
  econ_model.head.b = s.y_ss.dot(q0.asDiagonal() * s.y_ss);
  const ControlData data = make_control_data(s.data, econ_model, T_ini, N_p, u_scale);

  TrackingObjective obj;
  obj.Q = Eigen::MatrixXd::Zero(2 * N_p, 2 * N_p);
  for (Eigen::Index j = 0; j < N_p; ++j) obj.Q.block(2 * j, 2 * j, 2, 2) = q0.asDiagonal();
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(2 * N_p, 2 * N_p);
  for (Eigen::Index j = 1; j < N_p; ++j)
    D.block(2 * j, 2 * (j - 1), 2, 2) = -Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd Rt = Eigen::MatrixXd::Zero(2 * N_p, 2 * N_p);
  for (Eigen::Index j = 0; j < N_p; ++j) Rt.block(2 * j, 2 * j, 2, 2) = cfg.R;
  obj.R = D.transpose() * Rt * D;
  obj.y_ref = s.y_ss.replicate(N_p, 1);
  obj.u_ref = Eigen::VectorXd::Zero(2 * N_p);

  EconDeepcController econ(data, econ_model, cfg);
  TrackingDeepcController track(data, obj, cfg);
  LtiPlantSim plant_a(s.sys, Eigen::VectorXd::Constant(3, 0.4), cfg.u_lo, cfg.u_hi, 0.1, nullptr);
  LtiPlantSim plant_b(s.sys, Eigen::VectorXd::Constant(3, 0.4), cfg.u_lo, cfg.u_hi, 0.1, nullptr);
  plant_a.reset(0);
  plant_b.reset(0);

  InitWindow wa;
  wa.u = Eigen::MatrixXd::Zero(T_ini, 2);
  wa.y.resize(T_ini, 2);
  for (Eigen::Index k = 0; k < T_ini; ++k) {
    wa.y.row(k) = plant_a.output().transpose();
    plant_a.apply(Eigen::VectorXd::Zero(2));
    plant_b.apply(Eigen::VectorXd::Zero(2));
  }
  wa.u_prev = Eigen::VectorXd::Zero(2);
  InitWindow wb = wa;

  double worst = 0.0;
  Eigen::MatrixXd applied(40, 2);
  for (int k = 0; k < 40; ++k) {
    track.set_reference(obj.y_ref, wb.u_prev.replicate(N_p, 1));
    const auto ra = econ.step(wa);
    const auto rb = track.step(wb);
    if (ra.fallback || rb.fallback) return {false, "unexpected fallback"};
    worst = std::max(worst, (ra.u_apply - rb.u_apply).cwiseAbs().maxCoeff());
    applied.row(k) = ra.u_apply.transpose();
    const Eigen::VectorXd ya = plant_a.output();
    const Eigen::VectorXd yb = plant_b.output();
    plant_a.apply(ra.u_apply);
    plant_b.apply(rb.u_apply);
    wa.push(ra.u_apply, ya);
    wb.push(rb.u_apply, yb);
  }
  InputLog log{applied, cfg.u_lo, cfg.u_hi, "criterion-5 economic loop"};
  ctx.input_logs.push_back(std::move(log));
  std::ostringstream os;
  os << "max input deviation " << format_double(worst) << " over 40 steps (tol 1e-8)";
  return {worst <= 1e-8, os.str()};
}

Outcome criterion6(Context& ctx) {
  const LtiLoop s = make_lti_loop(6006, 100);
  const Eigen::Index T_ini = 2, N_p = 5, L = T_ini + N_p;
  ControllerConfig cfg = lti_cfg(T_ini, N_p, 5.0);
  cfg.R = 0.1 * Eigen::MatrixXd::Identity(2, 2);

  LiftingModel model = LiftingModel::identity(2, CostSign::minimize);
  const Eigen::VectorXd u_scale = input_scale_from_bounds(cfg.u_lo, cfg.u_hi);
  const ControlData full = make_control_data(s.data, model, T_ini, N_p, u_scale);
  const ControlData reduced = reduce_control_data(full, {});

  const Eigen::Index expected_rank = 2 * L + 3;  // n_u L + n_x
  if (reduced.n_r != expected_rank || reduced.decision_dim() != reduced.n_r) {
    std::ostringstream os;
    os << "reduced decision dimension " << reduced.decision_dim() << ", expected "
       << expected_rank;
    return {false, os.str()};
  }

  EconDeepcController c_full(full, model, cfg);
  EconDeepcController c_red(reduced, model, cfg);
  LtiPlantSim plant_a(s.sys, Eigen::VectorXd::Constant(3, 0.3), cfg.u_lo, cfg.u_hi, 0.1, nullptr);
  LtiPlantSim plant_b(s.sys, Eigen::VectorXd::Constant(3, 0.3), cfg.u_lo, cfg.u_hi, 0.1, nullptr);
  plant_a.reset(0);
  plant_b.reset(0);

  InitWindow wa;
  wa.u = Eigen::MatrixXd::Zero(T_ini, 2);
  wa.y.resize(T_ini, 2);
  for (Eigen::Index k = 0; k < T_ini; ++k) {
    wa.y.row(k) = plant_a.output().transpose();
    plant_a.apply(Eigen::VectorXd::Zero(2));
    plant_b.apply(Eigen::VectorXd::Zero(2));
  }
  wa.u_prev = Eigen::VectorXd::Zero(2);
  InitWindow wb = wa;

  double worst = 0.0;
  Eigen::MatrixXd applied(50, 2);
  for (int k = 0; k < 50; ++k) {
    const auto ra = c_full.step(wa);
    const auto rb = c_red.step(wb);
    if (ra.fallback || rb.fallback) return {false, "unexpected fallback"};
    worst = std::max(worst, (ra.u_apply - rb.u_apply).cwiseAbs().maxCoeff());
    applied.row(k) = ra.u_apply.transpose();
    const Eigen::VectorXd ya = plant_a.output();
    plant_a.apply(ra.u_apply);
    plant_b.apply(rb.u_apply);
    wa.push(ra.u_apply, ya);
    wb.push(rb.u_apply, ya);
  }
  InputLog log{applied, cfg.u_lo, cfg.u_hi, "criterion-6 reduced loop"};
  ctx.input_logs.push_back(std::move(log));
  std::ostringstream os;
  os << "max input deviation " << format_double(worst) << " over 50 steps (tol 1e-6), n_r = "
     << reduced.n_r;
  return {worst <= 1e-6, os.str()};
}

// --- criterion 7: cost-surrogate learning ----------------------------------

Outcome criterion7(Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(7007);
  const LtiSystem sys = random_controllable_lti(3, 2, 2, rng);
  auto stage = [](const Eigen::VectorXd&, const Eigen::VectorXd& y) {
    return 0.8 * y(0) * y(0) + 1.3 * y(1) * y(1) + 0.5 * y(0) - 0.4 * y(1) + 0.3;
  };
  LtiPlantSim plant(sys, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(2, -2.0),
                    Eigen::VectorXd::Constant(2, 2.0), 0.1, stage);
  Dataset ds = generate(plant, 150, 1400, 7, 7007);
  split(ds, 7, 2, 1, 7008);

  TrainConfig cfg;
  cfg.weights = {1.0, 1.0, 0.01};
  cfg.epochs = 100;
  cfg.batch_size = 5;
  cfg.learning_rate = 5e-3;
  cfg.seed = 13;
  cfg.n_z = 4;
  cfg.hidden_width = 64;
  cfg.hidden_layers = 2;
  cfg.sign = CostSign::minimize;
  const TrainResult r = train(ds, cfg, Eigen::VectorXd::Constant(2, 2.0));
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  for (const auto& e : r.history)
    if (e.val.econ < best) {
      best = e.val.econ;
      best_epoch = e.epoch;
    }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << "best validation econ loss " << format_double(best) << " at epoch " << best_epoch
     << " (tol 1e-4, " << format_double(dt) << " s)";
  return {best <= 1e-4 && dt < 120.0, os.str()};
}

// --- criterion 8: case-study pipelines --------------------------------------

CaseOutputs run_case(const std::string& cfg_file, const std::string& root, Context& ctx) {
  const ConfigMap map = ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/" + cfg_file);
  const ExperimentConfig cfg = ExperimentConfig::from(map);

  CaseOutputs out;
  out.dataset_dir = (fs::path(root) / "dataset").string();
  out.model_path = (fs::path(root) / "model.txt").string();
  out.econ_dir = (fs::path(root) / "econ").string();
  out.const_dir = (fs::path(root) / "constant").string();

  const auto gen = pipeline::generate_data(cfg, out.dataset_dir);
  if (!gen.pe.exciting) fail(ErrorKind::numeric, "excitation check failed");
  const auto tr = pipeline::train_model(cfg, out.dataset_dir, out.model_path, false);
  if (tr.diverged) fail(ErrorKind::numeric, "training diverged");
  const auto sim_econ =
      pipeline::simulate(cfg, out.model_path, out.dataset_dir, "econ", out.econ_dir, {}, -1);
  const auto sim_const =
      pipeline::simulate(cfg, "", "", "constant", out.const_dir, {}, -1);
  out.econ_mean = sim_econ.mean_avg_profit;
  out.const_mean = sim_const.mean_avg_profit;
  for (const auto& p : sim_econ.result_paths) ctx.cstr_result_files.push_back(p);
  return out;
}

Outcome criterion8(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string root = (fs::path(ctx.work_dir) / "case_study").string();
  fs::create_directories(root);

  ctx.case1 = run_case("cstr_case1.cfg", (fs::path(root) / "case1").string(), ctx);
  ctx.case2 = run_case("cstr_case2.cfg", (fs::path(root) / "case2").string(), ctx);

  ctx.eval_dir = (fs::path(root) / "evaluate").string();
  const auto ev = pipeline::evaluate(
      {ctx.case1.econ_dir, ctx.case1.const_dir, ctx.case2.econ_dir, ctx.case2.const_dir},
      ctx.eval_dir);
  ctx.summary_txt = ev.summary_path;
  ctx.summary_csv = ev.summary_csv_path;
  ctx.case_study_ran = true;

  const bool grid_ok = ev.table.find("case1") != std::string::npos &&
                       ev.table.find("case2") != std::string::npos &&
                       ev.table.find("econ") != std::string::npos &&
                       ev.table.find("constant") != std::string::npos;
  const bool beats1 = ctx.case1.econ_mean >= 1.10 * ctx.case1.const_mean;
  const bool beats2 = ctx.case2.econ_mean >= 1.10 * ctx.case2.const_mean;
  const bool trend = ctx.case2.econ_mean >= 0.95 * ctx.case1.econ_mean;
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream os;
  os << "case1 econ " << format_double(ctx.case1.econ_mean) << " vs constant "
     << format_double(ctx.case1.const_mean) << "; case2 econ "
     << format_double(ctx.case2.econ_mean) << " vs constant "
     << format_double(ctx.case2.const_mean) << "; grid " << (grid_ok ? "ok" : "MISSING") << " ("
     << format_double(dt) << " s)";
  return {grid_ok && beats1 && beats2 && trend && dt < 1800.0, os.str()};
}

// --- criterion 9: constraint satisfaction -----------------------------------

Outcome criterion9(Context& ctx) {
  if (!ctx.case_study_ran) {
    const Outcome dep = criterion8(ctx);
    if (!dep.pass) return {false, "criterion 8 prerequisite failed: " + dep.detail};
  }
  // Applied inputs lie in the box, exactly, across every recorded loop.
  for (const auto& log : ctx.input_logs) {
    for (Eigen::Index k = 0; k < log.u.rows(); ++k)
      for (Eigen::Index i = 0; i < log.u.cols(); ++i)
        if (log.u(k, i) < log.lo(i) || log.u(k, i) > log.hi(i))
          return {false, "input outside the box in " + log.origin};
  }
  const ConfigMap map =
      ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/cstr_case1.cfg");
  const ExperimentConfig cfg = ExperimentConfig::from(map);
  double worst_yc = 0.0;
  long n_steps = 0, n_optimal = 0;
  for (const auto& file : ctx.cstr_result_files) {
    const SimResult r = load_sim_result(file);
    for (const auto& rec : r.records) {
      ++n_steps;
      for (Eigen::Index i = 0; i < rec.u.size(); ++i)
        if (rec.u(i) < cfg.u_lo(i) || rec.u(i) > cfg.u_hi(i))
          return {false, "applied CSTR input escaped the admissible box"};
      if (rec.status == QpStatus::optimal && !rec.fallback) {
        ++n_optimal;
        worst_yc = std::max(worst_yc, rec.yc_violation);
      }
    }
  }
  std::ostringstream os;
  os << "inputs in box over " << n_steps << " CSTR steps and "
     << ctx.input_logs.size() << " LTI loops; worst predicted constraint violation "
     << format_double(worst_yc) << " over " << n_optimal << " optimal steps (tol 1e-6)";
  return {worst_yc <= 1e-6 && n_optimal > 0, os.str()};
}

// --- criterion 10: determinism ----------------------------------------------

Outcome criterion10(Context& ctx) {
  if (!ctx.case_study_ran) {
    const Outcome dep = criterion8(ctx);
    if (!dep.pass) return {false, "criterion 8 prerequisite failed: " + dep.detail};
  }
  const std::string root = (fs::path(ctx.work_dir) / "determinism_rerun").string();
  Context scratch;
  scratch.work_dir = ctx.work_dir;
  const CaseOutputs rerun = run_case("cstr_case1.cfg", root, scratch);

  const std::string eval2 = (fs::path(root) / "evaluate").string();
  const auto ev = pipeline::evaluate({rerun.econ_dir, rerun.const_dir}, eval2);

  // Byte-compare the summary artifacts of the first case-1 run against the
  // rerun (recomputed from scratch with identical seeds).
  const std::string eval1 = (fs::path(ctx.work_dir) / "case_study" / "evaluate_case1").string();
  const auto ev1 = pipeline::evaluate({ctx.case1.econ_dir, ctx.case1.const_dir}, eval1);

  const bool summaries_equal =
      read_text_file(ev1.summary_path) == read_text_file(ev.summary_path) &&
      read_text_file(ev1.summary_csv_path) == read_text_file(ev.summary_csv_path);
  bool aggregates_equal =
      read_text_file((fs::path(ctx.case1.econ_dir) / "aggregate_econ.csv").string()) ==
          read_text_file((fs::path(rerun.econ_dir) / "aggregate_econ.csv").string()) &&
      read_text_file((fs::path(ctx.case1.const_dir) / "aggregate_constant.csv").string()) ==
          read_text_file((fs::path(rerun.const_dir) / "aggregate_constant.csv").string());
  std::ostringstream os;
  os << "summary files byte-identical: " << (summaries_equal ? "yes" : "NO")
     << "; aggregates byte-identical: " << (aggregates_equal ? "yes" : "NO");
  return {summaries_equal && aggregates_equal, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.work_dir = "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) ctx.work_dir = argv[++i];
    else if (a == "--only" && i + 1 < argc) only.insert(std::atoi(argv[++i]));
  }
  fs::create_directories(ctx.work_dir);

  using Fn = std::function<Outcome(Context&)>;
  const std::vector<std::pair<const char*, Fn>> criteria = {
      {"fundamental-lemma residual", criterion1},
      {"gradient check vs finite differences", criterion2},
      {"QP solver vs projected-gradient oracle", criterion3},
      {"tracking DeePC set-point convergence", criterion4},
      {"economic-tracking equivalence", criterion5},
      {"full-rank reduction equivalence", criterion6},
      {"cost-surrogate learning", criterion7},
      {"case-study qualitative reproduction", criterion8},
      {"constraint satisfaction", criterion9},
      {"pipeline determinism", criterion10},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int num = static_cast<int>(i) + 1;
    if (!only.empty() && only.find(num) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%2d] %s %-42s %s (%.1f s)\n", num, out.pass ? "PASS" : "FAIL",
                criteria[i].first, out.detail.c_str(), dt);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
