#include <doctest.h>

#include "econdeepc/config.hpp"
#include "econdeepc/error.hpp"

using namespace econdeepc;

#ifndef ECONDEEPC_CONFIG_DIR
#define ECONDEEPC_CONFIG_DIR "configs"
#endif

TEST_CASE("the shipped case configs parse and validate") {
  const ConfigMap m1 = ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/cstr_case1.cfg");
  const ExperimentConfig c1 = ExperimentConfig::from(m1);
  CHECK(c1.T_hankel == 1000);
  CHECK(c1.n_window_samples == 1000);
  CHECK(c1.controller.T_ini == 2);
  CHECK(c1.controller.N_p == 5);
  CHECK(c1.training.n_z == 10);
  CHECK(c1.training.hidden_width == 128);
  CHECK(c1.training.hidden_layers == 2);
  CHECK(c1.training.epochs == 100);
  CHECK(c1.training.batch_size == 14);  // 100 samples / L = 7 windows per batch
  CHECK(c1.training.sign == CostSign::maximize);
  CHECK(c1.dt == doctest::Approx(0.025));
  CHECK(c1.u_lo(0) == doctest::Approx(1.5));
  CHECK(c1.u_hi(1) == doctest::Approx(1e5));
  CHECK(c1.label == "case1");

  const ConfigMap m2 = ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/cstr_case2.cfg");
  const ExperimentConfig c2 = ExperimentConfig::from(m2);
  CHECK(c2.n_window_samples == 9000);
  CHECK(c2.label == "case2");
}

TEST_CASE("config round-trip: parse, serialize, re-parse") {
  const ConfigMap m = ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/cstr_case1.cfg");
  const ConfigMap again = ConfigMap::parse_string(m.serialize(), "roundtrip");
  CHECK(m == again);
}

TEST_CASE("config parser errors carry line context") {
  CHECK_THROWS_WITH_AS(ConfigMap::parse_string("[plant\nno = 1\n", "f"),
                       doctest::Contains("f:1"), Error);
  CHECK_THROWS_WITH_AS(ConfigMap::parse_string("[a]\njust a line\n", "f"),
                       doctest::Contains("key = value"), Error);
  CHECK_THROWS_WITH_AS(ConfigMap::parse_string("[a]\nk = 1\nk = 2\n", "f"),
                       doctest::Contains("duplicate"), Error);
}

TEST_CASE("unknown keys and malformed ratios are rejected") {
  ConfigMap m = ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/cstr_case1.cfg");
  m.set("plant.typo_key", "1");
  CHECK_THROWS_WITH_AS(ExperimentConfig::from(m), doctest::Contains("typo_key"), Error);

  ConfigMap m2 = ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/cstr_case1.cfg");
  m2.set("data.split", "7:2");
  CHECK_THROWS_WITH_AS(ExperimentConfig::from(m2), doctest::Contains("split"), Error);
}

TEST_CASE("override via set() changes the parsed experiment") {
  ConfigMap m = ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/cstr_case1.cfg");
  m.set("evaluation.n_seeds", "3");
  m.set("controller.lambda_g", "0");
  const ExperimentConfig c = ExperimentConfig::from(m);
  CHECK(c.n_seeds == 3);
  CHECK(c.controller.lambda_g == 0.0);
}

TEST_CASE("mid-range input and evaluation seeds") {
  const ConfigMap m = ConfigMap::parse_file(std::string(ECONDEEPC_CONFIG_DIR) + "/cstr_case1.cfg");
  const ExperimentConfig c = ExperimentConfig::from(m);
  const Eigen::VectorXd mid = c.mid_input();
  CHECK(mid(0) == doctest::Approx(4.0));
  CHECK(mid(1) == doctest::Approx(45000.0));
  const auto seeds = c.evaluation_seeds();
  CHECK(seeds.size() == 20);
  CHECK(seeds.front() == 1000);
  CHECK(seeds.back() == 1019);
}

TEST_CASE("infinity values parse in vector keys") {
  ConfigMap m = ConfigMap::parse_string("[a]\nv = -inf 2.5 inf\n", "f");
  const Eigen::VectorXd v = m.get_vector("a.v", 3);
  CHECK(v(0) == -std::numeric_limits<double>::infinity());
  CHECK(v(1) == 2.5);
  CHECK(v(2) == std::numeric_limits<double>::infinity());
}
