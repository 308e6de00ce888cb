#include "econdeepc/plant.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "econdeepc/hankel.hpp"

namespace econdeepc {

void CstrParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) fail(ErrorKind::invalid_argument, std::string("CstrParams.") + name + " must be > 0");
  };
  positive(V1, "V1");
  positive(V2, "V2");
  positive(F1, "F1");
  positive(F2, "F2");
  positive(T10, "T10");
  positive(T20, "T20");
  positive(k0, "k0");
  positive(R, "R");
  positive(rho, "rho");
  positive(cp, "cp");
  if (!std::isfinite(E) || !std::isfinite(dH))
    fail(ErrorKind::invalid_argument, "CstrParams.E/dH must be finite");
}

void NoiseConfig::validate() const {
  if (conc_std < 0.0 || temp_std < 0.0)
    fail(ErrorKind::invalid_argument, "noise stddevs must be >= 0");
  if (!(conc_clip > 0.0) || !(temp_clip > 0.0))
    fail(ErrorKind::invalid_argument, "noise clips must be > 0");
}

Eigen::Vector4d cstr_derivative(const CstrState& x, const CstrInput& u, const CstrParams& p) {
  if (!x.to_vector().allFinite())
    fail(ErrorKind::numeric, "cstr_derivative: non-finite state (simulation diverged)");
  if (!(x.T1 > 0.0) || !(x.T2 > 0.0))
    fail(ErrorKind::numeric, "cstr_derivative: non-physical temperature");

  const double rate1 = p.k0 * std::exp(-p.E / (p.R * x.T1)) * x.CA1 * x.CA1;
  const double rate2 = p.k0 * std::exp(-p.E / (p.R * x.T2)) * x.CA2 * x.CA2;
  const double heat = -p.dH / (p.rho * p.cp);  // temperature rise per unit rate

  Eigen::Vector4d dx;
  dx(0) = p.F1 / p.V1 * (u.CA10 - x.CA1) - rate1;
  dx(1) = p.F1 / p.V1 * (p.T10 - x.T1) + heat * rate1 + u.Q1 / (p.rho * p.cp * p.V1);
  dx(2) = (p.F1 * x.CA1 + p.F2 * u.CA20 - (p.F1 + p.F2) * x.CA2) / p.V2 - rate2;
  dx(3) = (p.F1 * x.T1 + p.F2 * p.T20 - (p.F1 + p.F2) * x.T2) / p.V2 + heat * rate2 +
          u.Q2 / (p.rho * p.cp * p.V2);
  return dx;
}

CstrState cstr_step(const CstrState& x, const CstrInput& u, const CstrParams& p,
                    double dt, int n_substeps, Rng* noise_rng, const NoiseConfig& noise) {
  if (!(dt >= 0.0)) fail(ErrorKind::invalid_argument, "cstr_step: dt must be >= 0");
  if (n_substeps < 1) fail(ErrorKind::invalid_argument, "cstr_step: n_substeps must be >= 1");

  Eigen::Vector4d v = x.to_vector();
  if (dt > 0.0) {
    const double h = dt / n_substeps;
    for (int s = 0; s < n_substeps; ++s) {
      const CstrState s0 = CstrState::from_vector(v);
      const Eigen::Vector4d k1 = cstr_derivative(s0, u, p);
      const Eigen::Vector4d k2 = cstr_derivative(CstrState::from_vector(v + 0.5 * h * k1), u, p);
      const Eigen::Vector4d k3 = cstr_derivative(CstrState::from_vector(v + 0.5 * h * k2), u, p);
      const Eigen::Vector4d k4 = cstr_derivative(CstrState::from_vector(v + h * k3), u, p);
      v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }

  if (noise_rng != nullptr && noise.enabled()) {
    v(0) += noise_rng->clipped_normal(noise.conc_std, noise.conc_clip);
    v(1) += noise_rng->clipped_normal(noise.temp_std, noise.temp_clip);
    v(2) += noise_rng->clipped_normal(noise.conc_std, noise.conc_clip);
    v(3) += noise_rng->clipped_normal(noise.temp_std, noise.temp_clip);
  }
  v(0) = std::max(v(0), 0.0);
  v(2) = std::max(v(2), 0.0);

  if (!v.allFinite())
    fail(ErrorKind::numeric, "cstr_step: non-finite state (simulation diverged)");
  if (!(v(1) > 0.0) || !(v(3) > 0.0))
    fail(ErrorKind::numeric, "cstr_step: non-physical temperature");
  return CstrState::from_vector(v);
}

double stage_profit(const CstrInput& /*u*/, const Eigen::Vector4d& y, const CstrParams& p) {
  const double T1 = y(1), T2 = y(3);
  if (!(T1 > 0.0) || !(T2 > 0.0))
    fail(ErrorKind::invalid_argument, "stage_profit: temperatures must be > 0");
  return p.k0 * std::exp(-p.E / (p.R * T1)) * y(0) * y(0) +
         p.k0 * std::exp(-p.E / (p.R * T2)) * y(2) * y(2);
}

void LtiSystem::validate() const {
  if (A.rows() != A.cols()) fail(ErrorKind::invalid_argument, "LTI: A must be square");
  if (B.rows() != A.rows()) fail(ErrorKind::invalid_argument, "LTI: B row count must match A");
  if (C.cols() != A.rows()) fail(ErrorKind::invalid_argument, "LTI: C column count must match A");
  if (D.rows() != C.rows() || D.cols() != B.cols())
    fail(ErrorKind::invalid_argument, "LTI: D shape must be n_y x n_u");
}

bool LtiSystem::controllable() const {
  const Eigen::Index nx = n_x();
  Eigen::MatrixXd ctrb(nx, nx * n_u());
  Eigen::MatrixXd Ak = Eigen::MatrixXd::Identity(nx, nx);
  for (Eigen::Index k = 0; k < nx; ++k) {
    ctrb.middleCols(k * n_u(), n_u()) = Ak * B;
    Ak = A * Ak;
  }
  return numerical_rank(ctrb) == nx;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> lti_step(const LtiSystem& sys,
                                                     const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& u) {
  if (x.size() != sys.n_x() || u.size() != sys.n_u())
    fail(ErrorKind::invalid_argument, "lti_step: shape mismatch");
  return {sys.A * x + sys.B * u, sys.C * x + sys.D * u};
}

LtiSystem random_controllable_lti(Eigen::Index n_x, Eigen::Index n_u, Eigen::Index n_y,
                                  Rng& rng, double radius) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    LtiSystem sys;
    auto draw = [&rng](Eigen::Index r, Eigen::Index c) {
      Eigen::MatrixXd M(r, c);
      for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) M(i, j) = rng.uniform(-1.0, 1.0);
      return M;
    };
    sys.A = draw(n_x, n_x);
    const double rho = sys.A.eigenvalues().cwiseAbs().maxCoeff();
    if (rho > 0.0) sys.A *= radius / rho;
    sys.B = draw(n_x, n_u);
    sys.C = draw(n_y, n_x);
    sys.D = Eigen::MatrixXd::Zero(n_y, n_u);
    if (sys.controllable()) return sys;
  }
  fail(ErrorKind::internal, "random_controllable_lti: failed to draw a controllable system");
}

CstrPlantSim::CstrPlantSim(CstrParams params, NoiseConfig noise, CstrState x0,
                           Eigen::Vector4d u_lo, Eigen::Vector4d u_hi, double dt, int n_substeps)
    : params_(std::move(params)),
      noise_(noise),
      x0_(x0),
      state_(x0),
      u_lo_(std::move(u_lo)),
      u_hi_(std::move(u_hi)),
      dt_(dt),
      n_substeps_(n_substeps) {
  params_.validate();
  noise_.validate();
  if (!(dt_ > 0.0)) fail(ErrorKind::invalid_argument, "CstrPlantSim: dt must be > 0");
  rng_ = std::make_unique<Rng>(noise_.seed);
}

void CstrPlantSim::reset(std::uint64_t seed) {
  state_ = x0_;
  rng_ = std::make_unique<Rng>(seed);
  n_clamped_ = 0;
}

Eigen::VectorXd CstrPlantSim::apply(const Eigen::VectorXd& u) {
  if (u.size() != 4) fail(ErrorKind::invalid_argument, "CstrPlantSim: input must have 4 channels");
  Eigen::Vector4d uc = u;
  bool clamped = false;
  for (int i = 0; i < 4; ++i) {
    if (uc(i) < u_lo_(i)) { uc(i) = u_lo_(i); clamped = true; }
    if (uc(i) > u_hi_(i)) { uc(i) = u_hi_(i); clamped = true; }
  }
  if (clamped) {
    if (n_clamped_ == 0)
      std::fprintf(stderr, "cstr: input outside the admissible box, clamping (logged once per run)\n");
    ++n_clamped_;
  }
  state_ = cstr_step(state_, CstrInput::from_vector(uc), params_, dt_, n_substeps_,
                     noise_.enabled() ? rng_.get() : nullptr, noise_);
  return output();
}

double CstrPlantSim::stage_value(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const {
  return stage_profit(CstrInput::from_vector(u), y, params_);
}

LtiPlantSim::LtiPlantSim(LtiSystem sys, Eigen::VectorXd x0, Eigen::VectorXd u_lo,
                         Eigen::VectorXd u_hi, double dt, StageFn stage)
    : sys_(std::move(sys)),
      x0_(std::move(x0)),
      x_(x0_),
      u_lo_(std::move(u_lo)),
      u_hi_(std::move(u_hi)),
      dt_(dt),
      stage_(std::move(stage)) {
  sys_.validate();
  u_last_ = Eigen::VectorXd::Zero(sys_.n_u());
}

void LtiPlantSim::reset(std::uint64_t /*seed*/) {
  x_ = x0_;
  u_last_.setZero();
  n_clamped_ = 0;
}

Eigen::VectorXd LtiPlantSim::output() const {
  // With a direct feedthrough term the "current" output uses the last applied
  // input; closed-loop tests use D = 0 where this distinction vanishes.
  return sys_.C * x_ + sys_.D * u_last_;
}

Eigen::VectorXd LtiPlantSim::apply(const Eigen::VectorXd& u) {
  Eigen::VectorXd uc = u;
  bool clamped = false;
  for (Eigen::Index i = 0; i < uc.size(); ++i) {
    if (uc(i) < u_lo_(i)) { uc(i) = u_lo_(i); clamped = true; }
    if (uc(i) > u_hi_(i)) { uc(i) = u_hi_(i); clamped = true; }
  }
  if (clamped) ++n_clamped_;
  auto [xn, y] = lti_step(sys_, x_, uc);
  x_ = xn;
  u_last_ = uc;
  return output();
}

double LtiPlantSim::stage_value(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const {
  return stage_ ? stage_(u, y) : 0.0;
}

}  // namespace econdeepc
