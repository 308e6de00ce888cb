#include <doctest.h>

#include <filesystem>

#include "econdeepc/dataset.hpp"
#include "econdeepc/error.hpp"
#include "econdeepc/hankel.hpp"
#include "econdeepc/io.hpp"
#include "oracles.hpp"

using namespace econdeepc;

namespace {

std::unique_ptr<LtiPlantSim> small_plant(std::uint64_t seed) {
  Rng rng(seed);
  const LtiSystem sys = random_controllable_lti(3, 2, 2, rng);
  auto stage = [](const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
    return y.squaredNorm() + 0.25 * u(0);
  };
  return std::make_unique<LtiPlantSim>(sys, Eigen::VectorXd::Zero(3),
                                       Eigen::VectorXd::Constant(2, -3.0),
                                       Eigen::VectorXd::Constant(2, 3.0), 0.1, stage);
}

std::string temp_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("excite: degenerate box, bounds, and PE order") {
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(2, 1.5);
  const Eigen::MatrixXd constant = excite(a, a, 50, 1);
  CHECK((constant.array() == 1.5).all());

  Eigen::VectorXd lo(2), hi(2);
  lo << -1.0, 2.0;
  hi << 2.0, 7.0;
  const Eigen::MatrixXd U = excite(lo, hi, 10000, 2);
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(U.col(i).minCoeff() >= lo(i));
    CHECK(U.col(i).maxCoeff() <= hi(i));
  }

  // Persistently exciting at the order Lemma 1 needs (here n_x = 4).
  const Eigen::MatrixXd U2 = excite(lo, hi, 1000, 3);
  CHECK(is_persistently_exciting(U2, 7 + 4).exciting);

  CHECK_THROWS_AS(excite(hi, lo, 10, 0), Error);
  CHECK_THROWS_AS(excite(Eigen::VectorXd(), Eigen::VectorXd(), 10, 0), Error);
}

TEST_CASE("generate: window accounting and cost labels") {
  auto plant = small_plant(3);
  const Eigen::Index L = 7;
  Dataset ds = generate(*plant, 100, 100, L, 42);

  CHECK(ds.hankel_traj.length() == 100);
  // ceil(100 / 7) = 15 windows carrying at least the requested samples
  CHECK(ds.meta.n_windows == 15);
  CHECK(static_cast<Eigen::Index>(ds.windows.size()) == 15);
  for (const auto& w : ds.windows) CHECK(w.length() == L);

  // Labels are consistent with the plant's stage value.
  for (Eigen::Index k = 0; k < ds.hankel_traj.length(); ++k) {
    const double c = plant->stage_value(ds.hankel_traj.inputs.row(k).transpose(),
                                        ds.hankel_traj.outputs.row(k).transpose());
    CHECK(std::abs(ds.hankel_traj.costs(k) - c) <=
          1e-12 * std::max(1.0, std::abs(c)));
  }

  CHECK_THROWS_AS(generate(*plant, 5, 100, 7, 0), Error);
}

TEST_CASE("generate is deterministic per seed") {
  auto p1 = small_plant(5);
  auto p2 = small_plant(5);
  const Dataset a = generate(*p1, 60, 60, 6, 9);
  const Dataset b = generate(*p2, 60, 60, 6, 9);
  CHECK(a.hankel_traj.inputs == b.hankel_traj.inputs);
  CHECK(a.hankel_traj.outputs == b.hankel_traj.outputs);
  CHECK(a.windows[2].costs == b.windows[2].costs);
}

TEST_CASE("split: proportions, determinism, disjointness") {
  auto plant = small_plant(7);
  Dataset ds = generate(*plant, 60, 700, 7, 1);
  REQUIRE(ds.meta.n_windows == 100);

  split(ds, 7, 2, 1, 11);
  CHECK(ds.count(SplitTag::train) == 70);
  CHECK(ds.count(SplitTag::val) == 20);
  CHECK(ds.count(SplitTag::test) == 10);
  CHECK(ds.count(SplitTag::unassigned) == 0);

  Dataset ds2 = generate(*plant, 60, 700, 7, 1);
  split(ds2, 7, 2, 1, 11);
  CHECK(ds.tags == ds2.tags);

  // 10 windows -> 7/2/1
  Dataset small = generate(*plant, 60, 70, 7, 2);
  REQUIRE(small.meta.n_windows == 10);
  split(small, 7, 2, 1, 3);
  CHECK(small.count(SplitTag::train) == 7);
  CHECK(small.count(SplitTag::val) == 2);
  CHECK(small.count(SplitTag::test) == 1);

  Dataset tiny = generate(*plant, 60, 7 * 9, 7, 2);
  CHECK_THROWS_AS(split(tiny, 7, 2, 1, 3), Error);
}

TEST_CASE("save/load round-trip is lossless") {
  auto plant = small_plant(13);
  Dataset ds = generate(*plant, 60, 140, 7, 77);
  split(ds, 7, 2, 1, 5);
  const std::string dir = temp_dir("econdeepc_ds_roundtrip");
  save(ds, dir);
  const Dataset r = load(dir);

  CHECK(r.hankel_traj.inputs == ds.hankel_traj.inputs);
  CHECK(r.hankel_traj.outputs == ds.hankel_traj.outputs);
  CHECK(r.hankel_traj.costs == ds.hankel_traj.costs);
  REQUIRE(r.windows.size() == ds.windows.size());
  for (std::size_t w = 0; w < ds.windows.size(); ++w) {
    CHECK(r.windows[w].inputs == ds.windows[w].inputs);
    CHECK(r.windows[w].outputs == ds.windows[w].outputs);
    CHECK(r.windows[w].costs == ds.windows[w].costs);
  }
  CHECK(r.tags == ds.tags);
  CHECK(r.meta.seed == ds.meta.seed);
  CHECK(r.meta.dt == ds.meta.dt);
  CHECK(r.meta.L == ds.meta.L);
  std::filesystem::remove_all(dir);
}

TEST_CASE("load reports missing columns by name") {
  auto plant = small_plant(17);
  Dataset ds = generate(*plant, 60, 70, 7, 3);
  split(ds, 7, 2, 1, 4);
  const std::string dir = temp_dir("econdeepc_ds_badcol");
  save(ds, dir);

  const std::string csv = (std::filesystem::path(dir) / "dataset.csv").string();
  std::string text = read_text_file(csv);
  const auto pos = text.find(",c,split");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 8, ",split");  // drop the cost column from the header
  write_text_file(csv, text);
  CHECK_THROWS_WITH_AS(load(dir), doctest::Contains("'c'"), Error);
  std::filesystem::remove_all(dir);
}
