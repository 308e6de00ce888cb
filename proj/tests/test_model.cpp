#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "econdeepc/error.hpp"
#include "econdeepc/io.hpp"
#include "econdeepc/model.hpp"

using namespace econdeepc;

namespace {

LiftingModel small_model(std::uint64_t seed = 1) {
  Rng rng(seed);
  LiftingModel m;
  m.net = Mlp({3, 8, 8, 5}, rng);
  m.head.q = Eigen::VectorXd::Random(5) * 0.3;
  m.head.P = Eigen::RowVectorXd::Random(5);
  m.head.b = 0.7;
  m.head.sign = CostSign::maximize;
  m.G = Eigen::MatrixXd::Random(2, 5);
  m.yc_idx = {0, 2};
  m.y_mean = Eigen::Vector3d(0.5, -1.0, 2.0);
  m.y_std = Eigen::Vector3d(1.5, 0.5, 2.0);
  m.c_mean = 10.0;
  m.c_std = 4.0;
  m.fingerprint = "test";
  return m;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("lift: all-zero network maps everything to zero") {
  Rng rng(0);
  LiftingModel m = LiftingModel::identity(3);
  for (auto& l : m.net.layers()) {
    l.W.setZero();
    l.b.setZero();
  }
  Eigen::VectorXd z = m.lift(Eigen::VectorXd(Eigen::Vector3d(1, -2, 5)));
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity model lifts to the output itself") {
  const LiftingModel m = LiftingModel::identity(4);
  const Eigen::Vector4d y(0.3, -1.2, 4.0, 2.5);
  CHECK(m.lift(Eigen::VectorXd(y)).isApprox(y));
}

TEST_CASE("batch lift equals per-row lifts") {
  const LiftingModel m = small_model();
  Eigen::MatrixXd Y = Eigen::MatrixXd::Random(7, 3);
  const Eigen::MatrixXd Z = m.lift(Y);
  for (Eigen::Index i = 0; i < 7; ++i) {
    const Eigen::VectorXd zi = m.lift(Eigen::VectorXd(Y.row(i).transpose()));
    CHECK((Z.row(i).transpose() - zi).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("approx_cost in both sign modes") {
  CostHead h;
  h.q = Eigen::VectorXd::Zero(2);
  h.P = Eigen::RowVectorXd::Zero(2);
  h.b = 0.0;
  h.sign = CostSign::minimize;
  const Eigen::Vector2d z(1, 2);
  CHECK(approx_cost(h, Eigen::VectorXd(z)) == doctest::Approx(5.0));
  h.sign = CostSign::maximize;
  CHECK(approx_cost(h, Eigen::VectorXd(z)) == doctest::Approx(-5.0));

  h.b = 3.5;
  CHECK(approx_cost(h, Eigen::VectorXd(Eigen::Vector2d(0, 0))) == doctest::Approx(3.5));
}

TEST_CASE("curvature sign is fixed for every finite q") {
  CostHead h;
  h.q = Eigen::VectorXd::Random(6) * 20.0;  // wild values
  h.P = Eigen::RowVectorXd::Zero(6);
  h.sign = CostSign::maximize;
  CHECK((h.curvature().array() < 0.0).all());
  h.sign = CostSign::minimize;
  CHECK((h.curvature().array() > 0.0).all());
}

TEST_CASE("surrogate is convex (resp. concave) in z: midpoint inequality") {
  Rng rng(9);
  CostHead h;
  h.q = Eigen::VectorXd::Random(4);
  h.P = Eigen::RowVectorXd::Random(4);
  h.b = 0.3;
  h.sign = CostSign::minimize;
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = rng.uniform(-3, 3);
      b(i) = rng.uniform(-3, 3);
    }
    const double mid = approx_cost(h, Eigen::VectorXd(0.5 * (a + b)));
    const double avg = 0.5 * (approx_cost(h, a) + approx_cost(h, b));
    CHECK(mid <= avg + 1e-12);
  }
  h.sign = CostSign::maximize;
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = rng.uniform(-3, 3);
      b(i) = rng.uniform(-3, 3);
    }
    const double mid = approx_cost(h, Eigen::VectorXd(0.5 * (a + b)));
    const double avg = 0.5 * (approx_cost(h, a) + approx_cost(h, b));
    CHECK(mid >= avg - 1e-12);
  }
}

TEST_CASE("reconstruct is linear and selector G recovers outputs") {
  LiftingModel m = small_model();
  m.G = Eigen::MatrixXd::Zero(2, 5);
  Eigen::VectorXd z = Eigen::VectorXd::Random(5);
  CHECK(m.reconstruct(z).cwiseAbs().maxCoeff() == 0.0);

  m.G << Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 3);
  Eigen::VectorXd z2 = Eigen::VectorXd::Random(5);
  CHECK(m.reconstruct(z2).isApprox(z2.head(2)));

  const Eigen::VectorXd za = Eigen::VectorXd::Random(5), zb = Eigen::VectorXd::Random(5);
  CHECK((m.reconstruct(za + zb) - m.reconstruct(za) - m.reconstruct(zb)).cwiseAbs().maxCoeff() <
        1e-14);
}

TEST_CASE("model save/load round-trip preserves every parameter") {
  const LiftingModel m = small_model(77);
  const std::string path = temp_path("econdeepc_model_test.txt");
  save_model(m, path);
  const LiftingModel r = load_model(path);

  REQUIRE(r.net.layers().size() == m.net.layers().size());
  for (std::size_t k = 0; k < m.net.layers().size(); ++k) {
    CHECK(r.net.layers()[k].W == m.net.layers()[k].W);
    CHECK(r.net.layers()[k].b == m.net.layers()[k].b);
  }
  CHECK(r.head.q == m.head.q);
  CHECK(r.head.P == m.head.P);
  CHECK(r.head.b == m.head.b);
  CHECK(r.head.sign == m.head.sign);
  CHECK(r.G == m.G);
  CHECK(r.yc_idx == m.yc_idx);
  CHECK(r.y_mean == m.y_mean);
  CHECK(r.y_std == m.y_std);
  CHECK(r.c_mean == m.c_mean);
  CHECK(r.c_std == m.c_std);
  CHECK(r.fingerprint == m.fingerprint);

  // lift() identical before/after the round trip
  const Eigen::VectorXd y = Eigen::Vector3d(0.4, 1.1, -0.2);
  CHECK(m.lift(y) == r.lift(y));
  std::remove(path.c_str());
}

TEST_CASE("loading a tampered model reports dimension problems") {
  const LiftingModel m = small_model(78);
  const std::string path = temp_path("econdeepc_model_tamper.txt");
  save_model(m, path);
  std::string text = read_text_file(path);
  const auto pos = text.find("n_z 5");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 5, "n_z 9");
  write_text_file(path, text);
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("disagree"), Error);
  std::remove(path.c_str());
}

TEST_CASE("unsupported model version is a versioned error") {
  const std::string path = temp_path("econdeepc_model_version.txt");
  write_text_file(path, "econdeepc-model v99\nfingerprint -\n");
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("version"), Error);
  std::remove(path.c_str());
}

TEST_CASE("flat parameter indexing is consistent with tensors") {
  LiftingModel m = small_model(5);
  const Eigen::Index n = param_count(m);
  // Perturb through the flat view, observe in the tensors, and round-trip.
  const Eigen::Index probe = n - 1;  // last G entry
  const double before = get_param(m, probe);
  add_to_param(m, probe, 0.5);
  CHECK(m.G(m.G.rows() - 1, m.G.cols() - 1) == doctest::Approx(before + 0.5));
  CHECK(get_param(m, probe) == doctest::Approx(before + 0.5));

  const Eigen::Index w0 = 0;
  const double w_before = m.net.layers()[0].W(0, 0);
  add_to_param(m, w0, -0.25);
  CHECK(m.net.layers()[0].W(0, 0) == doctest::Approx(w_before - 0.25));
  CHECK(describe_param(m, 0).find("net.layer0.W") == 0);
  CHECK_THROWS_AS(get_param(m, n), Error);
}
