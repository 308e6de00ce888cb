#pragma once

#include <optional>
#include <string>
#include <vector>

#include "econdeepc/config.hpp"
#include "econdeepc/dataset.hpp"
#include "econdeepc/gradcheck.hpp"
#include "econdeepc/train.hpp"

namespace econdeepc::pipeline {

struct GenerateReport {
  PeResult pe;                 // excitation check at order L + n_x
  Eigen::Index T_hankel = 0;
  Eigen::Index n_windows = 0;
  Eigen::Index n_train = 0, n_val = 0, n_test = 0;
  std::string dataset_dir;
};

GenerateReport generate_data(const ExperimentConfig& cfg, const std::string& out_dir);

struct TrainReport {
  int best_epoch = 0;
  LossValues final_train, final_val;
  bool diverged = false;
  std::string model_path;
  std::string history_path;
  std::optional<GradCheckReport> gradcheck;
};

TrainReport train_model(const ExperimentConfig& cfg, const std::string& dataset_dir,
                        const std::string& model_path, bool run_grad_check);

struct SimulateReport {
  std::string mode;
  std::vector<std::uint64_t> seeds;
  std::vector<double> avg_profit;      // per completed seed, in seed order
  std::vector<std::uint64_t> failed_seeds;
  double mean_avg_profit = 0.0;
  double std_avg_profit = 0.0;
  int n_fallbacks = 0;
  std::vector<std::string> result_paths;
  std::string aggregate_path;
  double total_solve_s = 0.0;
};

// mode: "econ" | "econ-reduced" | "tracking" | "constant". Seeds fan out over
// worker threads; outputs are merged in seed order so the files are
// byte-stable. reduced_rank < 0 selects the tolerance-based rank.
SimulateReport simulate(const ExperimentConfig& cfg, const std::string& model_path,
                        const std::string& dataset_dir, const std::string& mode,
                        const std::string& out_dir,
                        const std::vector<std::uint64_t>& seeds_override,
                        Eigen::Index reduced_rank);

struct EvaluateReport {
  std::string table;  // method x data-size grid, also written to summary.txt
  std::string summary_path;
  std::string summary_csv_path;
  std::vector<std::string> series_paths;
};

// inputs: per-seed result files and/or directories containing them.
EvaluateReport evaluate(const std::vector<std::string>& inputs, const std::string& out_dir);

}  // namespace econdeepc::pipeline
