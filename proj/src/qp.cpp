#include "econdeepc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "econdeepc/error.hpp"

namespace econdeepc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}
}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iterations: return "max-iterations";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const Eigen::Index nn = n();
  if (H.cols() != nn || f.size() != nn)
    fail(ErrorKind::invalid_argument, "QP: H must be square and f conformal");
  const double hnorm = H.size() > 0 ? H.cwiseAbs().maxCoeff() : 0.0;
  const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * std::max(1.0, hnorm))
    fail(ErrorKind::invalid_argument, "QP: H is not symmetric");
  if (A_eq.rows() > 0 && (A_eq.cols() != nn || b_eq.size() != A_eq.rows()))
    fail(ErrorKind::invalid_argument, "QP: equality system shape mismatch");
  if (A_box.rows() > 0 && (A_box.cols() != nn || lo.size() != A_box.rows() || hi.size() != A_box.rows()))
    fail(ErrorKind::invalid_argument, "QP: box system shape mismatch");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (lo(i) > hi(i)) fail(ErrorKind::invalid_argument, "QP: lo > hi at box row " + std::to_string(i));

  // PSD check: exact spectrum for small problems, shifted-Cholesky existence
  // otherwise (catches any violation beyond the stated tolerance).
  const double tol = 1e-8 * std::max(1.0, hnorm);
  if (nn <= 256) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()),
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol)
      fail(ErrorKind::invalid_argument, "QP: H is not positive semidefinite");
  } else {
    Eigen::MatrixXd shifted = 0.5 * (H + H.transpose());
    shifted.diagonal().array() += tol;
    if (Eigen::LLT<Eigen::MatrixXd>(shifted).info() != Eigen::Success)
      fail(ErrorKind::invalid_argument, "QP: H is not positive semidefinite");
  }
}

struct QpSolver::Impl {
  QpProblem p;
  QpSettings s;

  Eigen::Index n = 0, m_eq = 0, m_box = 0, m = 0;
  Eigen::MatrixXd C;       // [A_eq; A_box]
  Eigen::VectorXd l, u;    // stacked bounds
  Eigen::VectorXd rho;     // per-row penalty
  Eigen::LLT<Eigen::MatrixXd> kkt;  // H + sigma I + C' diag(rho) C
  bool factored = false;

  // iterates
  Eigen::VectorXd x, z, y;
  bool have_state = false;

  void refresh_bounds() {
    l.resize(m);
    u.resize(m);
    l.head(m_eq) = p.b_eq;
    u.head(m_eq) = p.b_eq;
    l.tail(m_box) = p.lo;
    u.tail(m_box) = p.hi;
  }

  void factor() {
    Eigen::MatrixXd K = 0.5 * (p.H + p.H.transpose());
    K.diagonal().array() += s.sigma;
    if (m > 0) K.noalias() += C.transpose() * rho.asDiagonal() * C;
    kkt.compute(K);
    if (kkt.info() != Eigen::Success)
      fail(ErrorKind::numeric, "QP: failed to factor the splitting system");
    factored = true;
  }

  struct Residuals {
    double prim = 0, dual = 0, comp = 0;
    double prim_rel_scale = 1, dual_rel_scale = 1;
  };

  Residuals residuals(const Eigen::VectorXd& xv, const Eigen::VectorXd& yv) const {
    Residuals r;
    Eigen::VectorXd Cx = m > 0 ? Eigen::VectorXd(C * xv) : Eigen::VectorXd();
    double prim = 0, comp = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double below = l(i) == -kInf ? 0.0 : std::max(0.0, l(i) - Cx(i));
      const double above = u(i) == kInf ? 0.0 : std::max(0.0, Cx(i) - u(i));
      prim = std::max(prim, std::max(below, above));
      if (i >= m_eq) {
        const double dl = l(i) == -kInf ? kInf : Cx(i) - l(i);
        const double du = u(i) == kInf ? kInf : u(i) - Cx(i);
        comp = std::max(comp, std::abs(yv(i)) * std::min(1.0, std::max(0.0, std::min(dl, du))));
      }
    }
    Eigen::VectorXd grad = p.H * xv + p.f;
    if (m > 0) grad.noalias() += C.transpose() * yv;
    r.prim = prim;
    r.dual = inf_norm(grad);
    r.comp = comp;
    r.prim_rel_scale = std::max(1.0, m > 0 ? inf_norm(Cx) : 0.0);
    r.dual_rel_scale = std::max({1.0, inf_norm(p.H * xv), inf_norm(p.f)});
    return r;
  }

  // Equality feasibility certificate before iterating.
  bool equalities_consistent() const {
    if (m_eq == 0) return true;
    Eigen::VectorXd xl = p.A_eq.completeOrthogonalDecomposition().solve(p.b_eq);
    const double res = (p.A_eq * xl - p.b_eq).norm();
    return res <= 1e-8 * std::max(1.0, p.b_eq.norm());
  }

  // Active-set polish: re-solve with the detected active boxes as equalities.
  // Returns true when the polished iterate satisfies all constraints and
  // improves the KKT residuals. Two linear-algebra routes: a rank-revealing
  // factorization of the full KKT system (robust to singular H), and a Schur
  // complement through a cached Cholesky of H for large strictly convex
  // problems where the full KKT factorization would dominate the solve time.
  mutable Eigen::LLT<Eigen::MatrixXd> llt_H;
  mutable bool llt_H_tried = false;

  bool polish(Eigen::VectorXd& xv, Eigen::VectorXd& yv, Residuals& res) const {
    std::vector<Eigen::Index> act_lo, act_hi;
    const double atol = 1e-6 * std::max(1.0, inf_norm(z));
    for (Eigen::Index i = m_eq; i < m; ++i) {
      if (l(i) != -kInf && z(i) - l(i) <= atol && yv(i) < 0) act_lo.push_back(i);
      else if (u(i) != kInf && u(i) - z(i) <= atol && yv(i) > 0) act_hi.push_back(i);
    }
    const Eigen::Index ma = m_eq + static_cast<Eigen::Index>(act_lo.size() + act_hi.size());
    Eigen::MatrixXd Aact(ma, n);
    Eigen::VectorXd bact(ma);
    Aact.topRows(m_eq) = p.A_eq;
    bact.head(m_eq) = p.b_eq;
    Eigen::Index r = m_eq;
    for (Eigen::Index i : act_lo) { Aact.row(r) = C.row(i); bact(r) = l(i); ++r; }
    for (Eigen::Index i : act_hi) { Aact.row(r) = C.row(i); bact(r) = u(i); ++r; }

    Eigen::VectorXd xp(n), nu(ma);
    bool solved = false;
    if (n > 300) {
      if (!llt_H_tried) {
        llt_H_tried = true;
        llt_H.compute(0.5 * (p.H + p.H.transpose()));
      }
      if (llt_H.info() == Eigen::Success && ma > 0) {
        const Eigen::MatrixXd Hinv_At = llt_H.solve(Aact.transpose());
        const Eigen::VectorXd Hinv_f = llt_H.solve(p.f);
        const Eigen::MatrixXd S = Aact * Hinv_At;
        nu = S.ldlt().solve(-(Aact * Hinv_f) - bact);
        xp = -Hinv_f - Hinv_At * nu;
        solved = xp.allFinite();
      }
    }
    if (!solved) {
      Eigen::MatrixXd K(n + ma, n + ma);
      K.setZero();
      K.topLeftCorner(n, n) = 0.5 * (p.H + p.H.transpose());
      if (ma > 0) {
        K.topRightCorner(n, ma) = Aact.transpose();
        K.bottomLeftCorner(ma, n) = Aact;
      }
      Eigen::VectorXd rhs(n + ma);
      rhs.head(n) = -p.f;
      rhs.tail(ma) = bact;
      Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
      xp = sol.head(n);
      nu = sol.tail(ma);
      if (!xp.allFinite()) return false;
    }

    Eigen::VectorXd yp = Eigen::VectorXd::Zero(m);
    yp.head(m_eq) = nu.head(m_eq);
    r = m_eq;
    for (Eigen::Index i : act_lo) yp(i) = nu(r), ++r;
    for (Eigen::Index i : act_hi) yp(i) = nu(r), ++r;

    Residuals rp = residuals(xp, yp);
    // Dual feasibility of the box multipliers: lower-active rows need y <= 0,
    // upper-active rows y >= 0; tolerate round-off.
    double dual_feas_viol = 0;
    for (Eigen::Index i : act_lo) dual_feas_viol = std::max(dual_feas_viol, yp(i));
    for (Eigen::Index i : act_hi) dual_feas_viol = std::max(dual_feas_viol, -yp(i));
    const double dtol = 1e-7 * std::max(1.0, inf_norm(yv));
    if (dual_feas_viol > dtol) return false;
    if (rp.prim <= std::max(res.prim, 1e-9) && rp.dual <= std::max(res.dual, 1e-9)) {
      xv = xp;
      yv = yp;
      res = rp;
      return true;
    }
    return false;
  }

  QpSolution run(bool warm, const Eigen::VectorXd* x0) {
    if (!factored) factor();

    if (x0 != nullptr) {
      x = *x0;
      z = m > 0 ? Eigen::VectorXd(C * x) : Eigen::VectorXd();
      for (Eigen::Index i = 0; i < m; ++i) z(i) = std::clamp(z(i), l(i), u(i));
      y = Eigen::VectorXd::Zero(m);
    } else if (!warm || !have_state) {
      x = Eigen::VectorXd::Zero(n);
      z = Eigen::VectorXd::Zero(m);
      for (Eigen::Index i = 0; i < m; ++i) z(i) = std::clamp(0.0, l(i), u(i));
      y = Eigen::VectorXd::Zero(m);
    }
    have_state = true;

    QpSolution sol;
    if (!equalities_consistent()) {
      sol.status = QpStatus::infeasible;
      sol.x = x;
      sol.objective = p.objective(x);
      return sol;
    }

    int iter = 0;
    int since_refactor = 0;
    Residuals res;
    Eigen::VectorXd rhs(n), xt(n), zt(m), ztmp(m);
    while (iter < s.max_iters) {
      ++iter;
      ++since_refactor;
      rhs = s.sigma * x - p.f;
      if (m > 0) rhs.noalias() += C.transpose() * (rho.asDiagonal() * z - y);
      xt = kkt.solve(rhs);
      if (m > 0) zt.noalias() = C * xt;

      x = s.alpha * xt + (1.0 - s.alpha) * x;
      if (m > 0) {
        ztmp = s.alpha * zt + (1.0 - s.alpha) * z;
        for (Eigen::Index i = 0; i < m; ++i) {
          const double v = ztmp(i) + y(i) / rho(i);
          const double zn = std::clamp(v, l(i), u(i));
          y(i) += rho(i) * (ztmp(i) - zn);
          z(i) = zn;
        }
      }

      if (iter % s.check_every == 0 || iter == s.max_iters) {
        res = residuals(x, y);
        const bool prim_ok = res.prim <= s.tol_primal * res.prim_rel_scale;
        const bool dual_ok = res.dual <= s.tol_dual * res.dual_rel_scale;
        if (prim_ok && dual_ok) break;
        if (s.adaptive_rho && since_refactor >= 200) {
          const double ratio = (res.prim / res.prim_rel_scale + 1e-16) /
                               (res.dual / res.dual_rel_scale + 1e-16);
          if (ratio > 10.0 || ratio < 0.1) {
            const double scale = std::clamp(std::sqrt(ratio), 1e-3, 1e3);
            for (Eigen::Index i = 0; i < m; ++i)
              rho(i) = std::clamp(rho(i) * scale, 1e-8, 1e8);
            factor();
            since_refactor = 0;
          }
        }
      }
    }

    res = residuals(x, y);
    Eigen::VectorXd xb = x, yb = y;
    bool polished = false;
    if (s.polish && m > 0) polished = polish(xb, yb, res);

    sol.x = xb;
    sol.objective = p.objective(xb);
    sol.iterations = iter;
    sol.primal_residual = res.prim;
    sol.dual_residual = res.dual;
    sol.comp_slackness = res.comp;
    sol.polished = polished;
    const bool prim_ok = res.prim <= s.tol_primal * res.prim_rel_scale;
    const bool dual_ok = res.dual <= s.tol_dual * res.dual_rel_scale;
    sol.status = (prim_ok && dual_ok) ? QpStatus::optimal : QpStatus::max_iterations;
    return sol;
  }
};

QpSolver::QpSolver(QpProblem problem, QpSettings settings) : impl_(std::make_unique<Impl>()) {
  problem.validate();
  impl_->p = std::move(problem);
  impl_->s = settings;
  auto& d = *impl_;
  d.n = d.p.n();
  d.m_eq = d.p.A_eq.rows();
  d.m_box = d.p.A_box.rows();
  d.m = d.m_eq + d.m_box;
  d.C.resize(d.m, d.n);
  if (d.m_eq > 0) d.C.topRows(d.m_eq) = d.p.A_eq;
  if (d.m_box > 0) d.C.bottomRows(d.m_box) = d.p.A_box;
  d.refresh_bounds();
  d.rho.resize(d.m);
  for (Eigen::Index i = 0; i < d.m; ++i) {
    if (i < d.m_eq) {
      d.rho(i) = settings.rho * settings.rho_eq_scale;
    } else {
      const bool loose = d.l(i) == -kInf && d.u(i) == kInf;
      d.rho(i) = loose ? settings.rho * 1e-6 : settings.rho;
    }
  }
}

QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

void QpSolver::set_linear_cost(const Eigen::VectorXd& f, double c0) {
  if (f.size() != impl_->n) fail(ErrorKind::invalid_argument, "QP: f size mismatch");
  impl_->p.f = f;
  impl_->p.c0 = c0;
}

void QpSolver::set_equality_rhs(const Eigen::VectorXd& b_eq) {
  if (b_eq.size() != impl_->m_eq) fail(ErrorKind::invalid_argument, "QP: b_eq size mismatch");
  impl_->p.b_eq = b_eq;
  impl_->refresh_bounds();
}

void QpSolver::set_box_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() != impl_->m_box || hi.size() != impl_->m_box)
    fail(ErrorKind::invalid_argument, "QP: box bound size mismatch");
  impl_->p.lo = lo;
  impl_->p.hi = hi;
  impl_->refresh_bounds();
}

QpSolution QpSolver::solve() { return impl_->run(false, nullptr); }
QpSolution QpSolver::solve_warm() { return impl_->run(true, nullptr); }
QpSolution QpSolver::solve_from(const Eigen::VectorXd& x0) { return impl_->run(false, &x0); }

const QpProblem& QpSolver::problem() const { return impl_->p; }

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  QpSolver solver(problem, settings);
  return solver.solve();
}

}  // namespace econdeepc
