// econdeepc command-line front end. Links only the C API.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "econdeepc.h"

namespace {

// 0 = success, 1 = validation/config error, 2 = runtime/solver failure.
int exit_code_for(edpc_status s) {
  switch (s) {
    case EDPC_OK: return 0;
    case EDPC_ERR_INVALID_ARGUMENT:
    case EDPC_ERR_PARSE: return 1;
    default: return 2;
  }
}

int report_failure(edpc_status s, const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, edpc_last_error());
  return exit_code_for(s);
}

struct ConfigHandle {
  edpc_config* cfg = nullptr;
  ~ConfigHandle() { edpc_config_free(cfg); }
};

int load_config(const std::string& path, const std::vector<std::string>& overrides,
                ConfigHandle& out) {
  if (edpc_status s = edpc_config_load(path.c_str(), &out.cfg))
    return report_failure(s, "loading config");
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", ov.c_str());
      return 1;
    }
    if (edpc_status s = edpc_config_set(out.cfg, ov.substr(0, eq).c_str(),
                                        ov.substr(eq + 1).c_str()))
      return report_failure(s, "applying config override");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven economic predictive control toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(edpc_version()));

  std::string config_path, out_path, data_dir, model_path, mode = "econ";
  std::vector<std::string> overrides, inputs;
  std::vector<std::uint64_t> seeds;
  bool grad_check = false;
  std::string reduced_rank = "auto";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file")->required();
    cmd->add_option("--set", overrides, "override a config key (section.key=value)");
  };

  CLI::App* gen = app.add_subcommand("generate-data", "run open-loop excitation and save the dataset");
  add_common(gen);
  gen->add_option("--out", out_path, "output dataset directory")->required();
  gen->add_option("--seed", seeds, "override data generation seed");

  CLI::App* train = app.add_subcommand("train", "fit the lifting, cost head and reconstruction");
  add_common(train);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", model_path, "model checkpoint path")->required();
  train->add_flag("--grad-check", grad_check,
                  "verify analytic gradients against finite differences");

  CLI::App* sim = app.add_subcommand("simulate", "run closed-loop control");
  add_common(sim);
  sim->add_option("--model", model_path, "trained model checkpoint");
  sim->add_option("--data", data_dir, "dataset directory (hankel trajectory source)");
  sim->add_option("--mode", mode, "econ | econ-reduced | tracking | constant")
      ->check(CLI::IsMember({"econ", "econ-reduced", "tracking", "constant"}));
  sim->add_option("--out", out_path, "output directory")->required();
  sim->add_option("--seeds", seeds, "explicit simulation seeds (default: config)");
  sim->add_option("--reduced-rank", reduced_rank, "retained rank for econ-reduced (n or 'auto')");

  CLI::App* eval = app.add_subcommand("evaluate", "summarize simulation results");
  eval->add_option("--out", out_path, "output directory")->required();
  eval->add_option("inputs", inputs, "result files or directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage problems are validation errors
  }

  if (gen->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, overrides, cfg)) return rc;
    if (!seeds.empty())
      if (edpc_status s = edpc_config_set(cfg.cfg, "data.seed", std::to_string(seeds[0]).c_str()))
        return report_failure(s, "setting seed");
    edpc_generate_report rep{};
    if (edpc_status s = edpc_generate_data(cfg.cfg, out_path.c_str(), &rep))
      return report_failure(s, "generate-data");
    std::printf("dataset written to %s\n", out_path.c_str());
    std::printf("windows: %lld (train %lld / val %lld / test %lld)\n", rep.n_windows,
                rep.n_train, rep.n_val, rep.n_test);
    std::printf("persistent excitation at order L+n_x: %s (rank %lld of %lld)\n",
                rep.pe_ok ? "yes" : "NO", rep.pe_rank, rep.pe_required);
    return rep.pe_ok ? 0 : 2;
  }

  if (train->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, overrides, cfg)) return rc;
    edpc_train_report rep{};
    if (edpc_status s = edpc_train(cfg.cfg, data_dir.c_str(), model_path.c_str(),
                                   grad_check ? 1 : 0, &rep))
      return report_failure(s, "train");
    std::printf("model written to %s (best epoch %d)\n", model_path.c_str(), rep.best_epoch);
    std::printf("final losses: train %.6g, val %.6g\n", rep.final_train_loss, rep.final_val_loss);
    if (rep.diverged) std::fprintf(stderr, "warning: training diverged; kept best checkpoint\n");
    if (grad_check) {
      std::printf("gradient check: max relative error %.3g\n", rep.grad_check_max_rel_err);
      if (rep.grad_check_max_rel_err > 1e-3) {
        std::fprintf(stderr, "error: gradient check failed (max rel err > 1e-3)\n");
        return 2;
      }
    }
    return 0;
  }

  if (sim->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, overrides, cfg)) return rc;
    long long rank = -1;
    if (reduced_rank != "auto") {
      try {
        rank = std::stoll(reduced_rank);
      } catch (...) {
        std::fprintf(stderr, "error: --reduced-rank expects an integer or 'auto'\n");
        return 1;
      }
    }
    edpc_simulate_report rep{};
    if (edpc_status s = edpc_simulate(cfg.cfg, model_path.empty() ? nullptr : model_path.c_str(),
                                      data_dir.empty() ? nullptr : data_dir.c_str(), mode.c_str(),
                                      out_path.c_str(), seeds.empty() ? nullptr : seeds.data(),
                                      static_cast<int>(seeds.size()), rank, &rep))
      return report_failure(s, "simulate");
    std::printf("results written to %s\n", out_path.c_str());
    std::printf("average profit over seeds: %.6g +- %.6g (fallbacks: %d, solve time %.2f s)\n",
                rep.mean_avg_profit, rep.std_avg_profit, rep.n_fallbacks, rep.total_solve_s);
    return 0;
  }

  if (eval->parsed()) {
    std::vector<const char*> paths;
    paths.reserve(inputs.size());
    for (const auto& p : inputs) paths.push_back(p.c_str());
    std::string table(8192, '\0');
    if (edpc_status s = edpc_evaluate(paths.data(), static_cast<int>(paths.size()),
                                      out_path.c_str(), table.data(), table.size()))
      return report_failure(s, "evaluate");
    std::printf("%s\n", table.c_str());
    std::printf("summary written to %s\n", out_path.c_str());
    return 0;
  }

  return 1;
}
