#pragma once

#include <cstdint>
#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "econdeepc/error.hpp"
#include "econdeepc/rng.hpp"

namespace econdeepc {

// --- Two-CSTR-in-series process -------------------------------------------
//
// Reactant A converts to product B in two stirred tanks connected in series.
// Reactor 1 is fed with (F1, C_A10, T10); reactor 2 receives reactor 1's
// outflow plus a fresh feed (F2, C_A20, T20). Both reactions are second order
// with Arrhenius kinetics k0*exp(-E/(R*Ti))*C_Ai^2, exothermic with enthalpy
// dH < 0, and each reactor has a heat input Qi. States are concentrations and
// temperatures; the measured output equals the state.
//
// Parameter values are intentionally not compiled in; they come from the
// experiment config file (see configs/).

struct CstrParams {
  double V1 = 0, V2 = 0;    // reactor volumes [m^3]
  double F1 = 0, F2 = 0;    // volumetric flow rates [m^3/h]
  double T10 = 0, T20 = 0;  // feed temperatures [K]
  double k0 = 0;            // pre-exponential factor [m^3/kmol/h]
  double E = 0;             // activation energy [kJ/kmol]
  double R = 0;             // gas constant [kJ/kmol/K]
  double dH = 0;            // reaction enthalpy [kJ/kmol], negative = exothermic
  double rho = 0;           // density [kg/m^3]
  double cp = 0;            // heat capacity [kJ/kg/K]

  void validate() const;
};

struct CstrState {
  double CA1 = 0, T1 = 0, CA2 = 0, T2 = 0;  // [kmol/m^3], [K]

  Eigen::Vector4d to_vector() const { return {CA1, T1, CA2, T2}; }
  static CstrState from_vector(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
};

struct CstrInput {
  double CA10 = 0, Q1 = 0, CA20 = 0, Q2 = 0;  // [kmol/m^3], [kJ/h]

  Eigen::Vector4d to_vector() const { return {CA10, Q1, CA20, Q2}; }
  static CstrInput from_vector(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
};

// Per-period additive state disturbance: clipped Gaussian per channel,
// concentration channels with (conc_std, conc_clip), temperatures with
// (temp_std, temp_clip).
struct NoiseConfig {
  double conc_std = 0.0;
  double conc_clip = 1.0;
  double temp_std = 0.0;
  double temp_clip = 50.0;
  std::uint64_t seed = 0;

  bool enabled() const { return conc_std > 0.0 || temp_std > 0.0; }
  void validate() const;
};

// Right-hand side of the series mass/energy balance, d/dt [CA1, T1, CA2, T2].
Eigen::Vector4d cstr_derivative(const CstrState& x, const CstrInput& u, const CstrParams& p);

// One sampling period: fixed-step RK4 with n_substeps, then one disturbance
// draw per channel (when rng is non-null), concentrations clamped at zero.
CstrState cstr_step(const CstrState& x, const CstrInput& u, const CstrParams& p,
                    double dt, int n_substeps, Rng* noise_rng, const NoiseConfig& noise);

// The measured output is the state itself (n_y = 4).
inline Eigen::Vector4d cstr_output(const CstrState& x) { return x.to_vector(); }

// Economic profit k0*exp(-E/(R*T1))*C_A1^2 + k0*exp(-E/(R*T2))*C_A2^2
// [kmol/m^3/h]; the input enters the signature for interface uniformity only.
double stage_profit(const CstrInput& u, const Eigen::Vector4d& y, const CstrParams& p);

// --- Discrete LTI sandbox ---------------------------------------------------

struct LtiSystem {
  Eigen::MatrixXd A, B, C, D;

  Eigen::Index n_x() const { return A.rows(); }
  Eigen::Index n_u() const { return B.cols(); }
  Eigen::Index n_y() const { return C.rows(); }

  void validate() const;
  bool controllable() const;
};

// x+ = Ax + Bu, y = Cx + Du.
std::pair<Eigen::VectorXd, Eigen::VectorXd> lti_step(const LtiSystem& sys,
                                                     const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& u);

// Random controllable system with spectral radius scaled to `radius`.
LtiSystem random_controllable_lti(Eigen::Index n_x, Eigen::Index n_u, Eigen::Index n_y,
                                  Rng& rng, double radius = 0.9);

// --- Closed-loop plant abstraction ------------------------------------------

// What a receding-horizon loop needs from a plant: advance one period under a
// (clamped) input, read the measurement, and price a (u, y) pair.
class PlantSim {
 public:
  virtual ~PlantSim() = default;
  virtual void reset(std::uint64_t seed) = 0;
  virtual Eigen::Index n_u() const = 0;
  virtual Eigen::Index n_y() const = 0;
  virtual Eigen::VectorXd output() const = 0;
  virtual Eigen::VectorXd state() const = 0;
  // Advances one sampling period and returns the new output. Inputs outside
  // the admissible box are clamped (counted in n_clamped).
  virtual Eigen::VectorXd apply(const Eigen::VectorXd& u) = 0;
  virtual double stage_value(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const = 0;
  virtual const Eigen::VectorXd& u_lo() const = 0;
  virtual const Eigen::VectorXd& u_hi() const = 0;
  virtual double dt() const = 0;
  virtual long n_clamped() const = 0;
};

class CstrPlantSim final : public PlantSim {
 public:
  CstrPlantSim(CstrParams params, NoiseConfig noise, CstrState x0,
               Eigen::Vector4d u_lo, Eigen::Vector4d u_hi, double dt, int n_substeps);

  void reset(std::uint64_t seed) override;
  Eigen::Index n_u() const override { return 4; }
  Eigen::Index n_y() const override { return 4; }
  Eigen::VectorXd output() const override { return cstr_output(state_); }
  Eigen::VectorXd state() const override { return state_.to_vector(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& u) override;
  double stage_value(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const override;
  const Eigen::VectorXd& u_lo() const override { return u_lo_; }
  const Eigen::VectorXd& u_hi() const override { return u_hi_; }
  double dt() const override { return dt_; }
  long n_clamped() const override { return n_clamped_; }

  const CstrParams& params() const { return params_; }

 private:
  CstrParams params_;
  NoiseConfig noise_;
  CstrState x0_, state_;
  Eigen::VectorXd u_lo_, u_hi_;
  double dt_;
  int n_substeps_;
  std::unique_ptr<Rng> rng_;
  long n_clamped_ = 0;
};

class LtiPlantSim final : public PlantSim {
 public:
  using StageFn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

  LtiPlantSim(LtiSystem sys, Eigen::VectorXd x0, Eigen::VectorXd u_lo, Eigen::VectorXd u_hi,
              double dt, StageFn stage);

  void reset(std::uint64_t seed) override;
  Eigen::Index n_u() const override { return sys_.n_u(); }
  Eigen::Index n_y() const override { return sys_.n_y(); }
  Eigen::VectorXd output() const override;
  Eigen::VectorXd state() const override { return x_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& u) override;
  double stage_value(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const override;
  const Eigen::VectorXd& u_lo() const override { return u_lo_; }
  const Eigen::VectorXd& u_hi() const override { return u_hi_; }
  double dt() const override { return dt_; }
  long n_clamped() const override { return n_clamped_; }

  const LtiSystem& system() const { return sys_; }

 private:
  LtiSystem sys_;
  Eigen::VectorXd x0_, x_, u_last_;
  Eigen::VectorXd u_lo_, u_hi_;
  double dt_;
  StageFn stage_;
  long n_clamped_ = 0;
};

}  // namespace econdeepc
