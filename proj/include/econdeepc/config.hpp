#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "econdeepc/controller.hpp"
#include "econdeepc/plant.hpp"
#include "econdeepc/train.hpp"

namespace econdeepc {

// INI-style nested key-value file: [section] headers (dots allowed), one
// "key = value" per line, '#' comments. Keys are addressed as
// "section.key"; insertion order is preserved for round-trips.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_string(const std::string& text, const std::string& name);

  std::string serialize() const;

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double def) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long def) const;
  Eigen::VectorXd get_vector(const std::string& key, Eigen::Index expected = -1) const;

  void set(const std::string& key, const std::string& value);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  bool operator==(const ConfigMap& other) const { return entries_ == other.entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;  // full key -> value
};

// The whole experiment in one artifact: plant, data generation, training,
// controller and evaluation settings.
struct ExperimentConfig {
  // [plant]
  double dt = 0.025;
  int n_substeps = 10;
  CstrState x0;
  Eigen::VectorXd u_lo, u_hi;  // size 4
  CstrParams params;
  NoiseConfig noise;

  // [data]
  Eigen::Index T_hankel = 1000;
  Eigen::Index n_window_samples = 1000;
  std::uint64_t data_seed = 0;
  double split_train = 7, split_val = 2, split_test = 1;
  std::uint64_t split_seed = 0;

  // [training]
  TrainConfig training;

  // [controller]
  ControllerConfig controller;
  Eigen::VectorXd y_ref, u_ref;  // per-step tracking references (optional)

  // [evaluation]
  int steps = 100;
  int n_seeds = 20;
  std::uint64_t seed0 = 1000;
  int threads = 0;  // 0 = hardware concurrency
  Eigen::VectorXd warmup_input;  // physical; defaults to mid-range of the input box
  std::string label = "default";

  static ExperimentConfig from(const ConfigMap& map);
  void validate() const;

  Eigen::VectorXd mid_input() const;  // mid-range of the input box
  std::vector<std::uint64_t> evaluation_seeds() const;
};

}  // namespace econdeepc
