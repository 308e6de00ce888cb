#include <doctest.h>

#include <cmath>

#include "econdeepc/error.hpp"
#include "econdeepc/plant.hpp"

using namespace econdeepc;

namespace {

// Values of the series-CSTR benchmark the shipped configs use; tests only
// need something physically sane.
CstrParams test_params() {
  CstrParams p;
  p.V1 = 1.0;
  p.V2 = 1.0;
  p.F1 = 5.0;
  p.F2 = 5.0;
  p.T10 = 300.0;
  p.T20 = 300.0;
  p.k0 = 8.46e6;
  p.E = 5.0e4;
  p.R = 8.314;
  p.dH = -1.15e4;
  p.rho = 1000.0;
  p.cp = 0.231;
  return p;
}

const CstrState kState{2.0, 400.0, 2.0, 400.0};
const CstrInput kInput{4.0, 0.0, 4.0, 0.0};

}  // namespace

TEST_CASE("cstr_derivative: no reactant, no feed, no flux") {
  CstrParams p = test_params();
  CstrState x{0.0, 400.0, 0.0, 400.0};
  CstrInput u{0.0, 0.0, 0.0, 0.0};
  const Eigen::Vector4d dx = cstr_derivative(x, u, p);
  CHECK(dx(0) == doctest::Approx(0.0));
  CHECK(dx(2) == doctest::Approx(0.0));
}

TEST_CASE("cstr_derivative: E = 0 collapses the Arrhenius factor") {
  CstrParams p = test_params();
  p.k0 = 1.0;
  p.E = 0.0;
  p.F1 = 0.0;  // isolate the reaction term; reactor 2 keeps flow
  CstrState x{2.0, 300.0, 0.0, 300.0};
  CstrInput u{0.0, 0.0, 0.0, 0.0};
  const Eigen::Vector4d dx = cstr_derivative(x, u, p);
  CHECK(dx(0) == doctest::Approx(-4.0));  // consumption rate k0 * CA1^2 = 4
}

TEST_CASE("cstr_derivative is deterministic and affine in the heat inputs") {
  CstrParams p = test_params();
  const Eigen::Vector4d d1 = cstr_derivative(kState, kInput, p);
  const Eigen::Vector4d d2 = cstr_derivative(kState, kInput, p);
  CHECK(d1 == d2);

  CstrInput ua = kInput, ub = kInput, uc = kInput;
  ua.Q1 = 1e4;
  ub.Q1 = 2e4;
  uc.Q1 = 3e4;
  const Eigen::Vector4d da = cstr_derivative(kState, ua, p);
  const Eigen::Vector4d db = cstr_derivative(kState, ub, p);
  const Eigen::Vector4d dc = cstr_derivative(kState, uc, p);
  // Equal Q increments give equal derivative increments.
  CHECK((db - da).isApprox(dc - db, 1e-12));
}

TEST_CASE("cstr_step: dt = 0 with no noise leaves the state unchanged") {
  CstrParams p = test_params();
  NoiseConfig noise;
  const CstrState out = cstr_step(kState, kInput, p, 0.0, 10, nullptr, noise);
  CHECK(out.to_vector() == kState.to_vector());
}

TEST_CASE("cstr_step: noise-free stepping is bit-reproducible") {
  CstrParams p = test_params();
  NoiseConfig noise;
  const CstrState a = cstr_step(kState, kInput, p, 0.025, 10, nullptr, noise);
  const CstrState b = cstr_step(kState, kInput, p, 0.025, 10, nullptr, noise);
  CHECK(a.to_vector() == b.to_vector());
}

TEST_CASE("cstr_step: RK4 order on a smooth trajectory") {
  CstrParams p = test_params();
  NoiseConfig noise;
  // Richardson: halving the substep size should shrink the error ~16x.
  const CstrState fine = cstr_step(kState, kInput, p, 0.025, 160, nullptr, noise);
  const CstrState h1 = cstr_step(kState, kInput, p, 0.025, 5, nullptr, noise);
  const CstrState h2 = cstr_step(kState, kInput, p, 0.025, 10, nullptr, noise);
  const double e1 = (h1.to_vector() - fine.to_vector()).norm();
  const double e2 = (h2.to_vector() - fine.to_vector()).norm();
  const double order = std::log2(e1 / e2);
  CHECK(order >= 3.5);
}

TEST_CASE("disturbances respect their clip bounds and are seed-reproducible") {
  NoiseConfig noise;
  noise.conc_std = 0.01;
  noise.conc_clip = 1.0;
  noise.temp_std = 1.0;
  noise.temp_clip = 50.0;

  Rng rng(42);
  for (int i = 0; i < 100000; ++i) {
    CHECK(std::abs(rng.clipped_normal(noise.conc_std, noise.conc_clip)) <= noise.conc_clip);
    CHECK(std::abs(rng.clipped_normal(noise.temp_std, noise.temp_clip)) <= noise.temp_clip);
  }

  // Tight clip actually engages.
  Rng rng2(43);
  bool clipped = false;
  for (int i = 0; i < 1000; ++i)
    if (std::abs(rng2.clipped_normal(1.0, 0.5)) == 0.5) clipped = true;
  CHECK(clipped);

  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.clipped_normal(1.0, 50.0) == b.clipped_normal(1.0, 50.0));
}

TEST_CASE("stage_profit basics") {
  CstrParams p = test_params();
  CHECK(stage_profit(kInput, Eigen::Vector4d(0, 400, 0, 400), p) == doctest::Approx(0.0));

  CstrParams q = test_params();
  q.k0 = 1.0;
  q.E = 0.0;
  CHECK(stage_profit(kInput, Eigen::Vector4d(1, 300, 2, 300), q) == doctest::Approx(5.0));

  // Symmetric reactors give twice the single-reactor term.
  const double both = stage_profit(kInput, Eigen::Vector4d(2, 400, 2, 400), p);
  const double one = stage_profit(kInput, Eigen::Vector4d(2, 400, 0, 400), p);
  CHECK(both == doctest::Approx(2.0 * one));

  CHECK_THROWS_AS(stage_profit(kInput, Eigen::Vector4d(1, -5, 1, 300), p), Error);
}

TEST_CASE("stage_profit is monotone in concentration and temperature") {
  CstrParams p = test_params();
  double last = stage_profit(kInput, Eigen::Vector4d(0.5, 400, 1, 400), p);
  for (double c = 1.0; c < 5.0; c += 0.5) {
    const double v = stage_profit(kInput, Eigen::Vector4d(c, 400, 1, 400), p);
    CHECK(v > last);
    last = v;
  }
  last = stage_profit(kInput, Eigen::Vector4d(2, 320, 1, 400), p);
  for (double t = 340; t < 500; t += 20) {
    const double v = stage_profit(kInput, Eigen::Vector4d(2, t, 1, 400), p);
    CHECK(v > last);
    last = v;
  }
}

TEST_CASE("lti_step basics") {
  LtiSystem sys;
  sys.A = Eigen::MatrixXd::Identity(2, 2);
  sys.B = Eigen::MatrixXd::Zero(2, 1);
  sys.C = Eigen::MatrixXd::Identity(2, 2);
  sys.D = Eigen::MatrixXd::Zero(2, 1);
  const Eigen::VectorXd x = Eigen::Vector2d(1, 2);
  auto [xn, y] = lti_step(sys, x, Eigen::VectorXd::Constant(1, 3.0));
  CHECK(xn.isApprox(x));

  LtiSystem s1;
  s1.A = Eigen::MatrixXd::Constant(1, 1, 0.5);
  s1.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s1.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s1.D = Eigen::MatrixXd::Zero(1, 1);
  auto [x1, y1] = lti_step(s1, Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Zero(1));
  CHECK(x1(0) == doctest::Approx(1.0));
  CHECK(y1(0) == doctest::Approx(2.0));

  CHECK_THROWS_AS(lti_step(s1, Eigen::Vector2d(1, 2), Eigen::VectorXd::Zero(1)), Error);
}

TEST_CASE("lti superposition") {
  Rng rng(9);
  const LtiSystem sys = random_controllable_lti(3, 2, 2, rng);
  const int T = 20;
  Eigen::MatrixXd U1(T, 2), U2(T, 2);
  for (int k = 0; k < T; ++k)
    for (int i = 0; i < 2; ++i) {
      U1(k, i) = rng.uniform(-1, 1);
      U2(k, i) = rng.uniform(-1, 1);
    }
  auto roll = [&](const Eigen::MatrixXd& U) {
    Eigen::MatrixXd Y(T, 2);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    for (int k = 0; k < T; ++k) {
      auto [xn, y] = lti_step(sys, x, U.row(k).transpose());
      Y.row(k) = y.transpose();
      x = xn;
    }
    return Y;
  };
  CHECK((roll(U1 + U2) - (roll(U1) + roll(U2))).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("CstrPlantSim clamps out-of-box inputs and counts them") {
  CstrParams p = test_params();
  NoiseConfig noise;
  const Eigen::Vector4d lo(1.5, -1e4, 1.5, -1e4);
  const Eigen::Vector4d hi(6.5, 1e5, 6.5, 1e5);
  CstrPlantSim plant(p, noise, kState, lo, hi, 0.025, 10);
  plant.apply(Eigen::Vector4d(7.2, 0, 4.0, 0));
  CHECK(plant.n_clamped() == 1);
  plant.apply(Eigen::Vector4d(4.0, 0, 4.0, 0));
  CHECK(plant.n_clamped() == 1);
}

TEST_CASE("CstrPlantSim: same seed, same trajectory") {
  CstrParams p = test_params();
  NoiseConfig noise;
  noise.conc_std = 0.01;
  noise.temp_std = 1.0;
  const Eigen::Vector4d lo(1.5, -1e4, 1.5, -1e4);
  const Eigen::Vector4d hi(6.5, 1e5, 6.5, 1e5);
  CstrPlantSim a(p, noise, kState, lo, hi, 0.025, 10);
  CstrPlantSim b(p, noise, kState, lo, hi, 0.025, 10);
  a.reset(5);
  b.reset(5);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd ya = a.apply(Eigen::Vector4d(4, 1e4, 4, 1e4));
    const Eigen::VectorXd yb = b.apply(Eigen::Vector4d(4, 1e4, 4, 1e4));
    CHECK(ya == yb);
  }
}

TEST_CASE("cstr output is the identity on the state") {
  const Eigen::Vector4d y = cstr_output(kState);
  CHECK(y == kState.to_vector());
  CHECK(y.size() == 4);
}
