#include "econdeepc.h"

#include <cstring>
#include <string>
#include <vector>

#include "econdeepc/config.hpp"
#include "econdeepc/error.hpp"
#include "econdeepc/model.hpp"
#include "econdeepc/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

edpc_status status_from(const econdeepc::Error& e) {
  using econdeepc::ErrorKind;
  switch (e.kind()) {
    case ErrorKind::invalid_argument: return EDPC_ERR_INVALID_ARGUMENT;
    case ErrorKind::io: return EDPC_ERR_IO;
    case ErrorKind::parse: return EDPC_ERR_PARSE;
    case ErrorKind::numeric: return EDPC_ERR_NUMERIC;
    case ErrorKind::internal: return EDPC_ERR_INTERNAL;
  }
  return EDPC_ERR_INTERNAL;
}

template <typename Fn>
edpc_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return EDPC_OK;
  } catch (const econdeepc::Error& e) {
    g_last_error = e.what();
    return status_from(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EDPC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return EDPC_ERR_INTERNAL;
  }
}

edpc_status require(bool ok, const char* msg) {
  if (ok) return EDPC_OK;
  g_last_error = msg;
  return EDPC_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct edpc_config {
  econdeepc::ConfigMap map;
};

struct edpc_model {
  econdeepc::LiftingModel model;
};

extern "C" {

const char* edpc_version(void) { return "0.1.0"; }

const char* edpc_last_error(void) { return g_last_error.c_str(); }

edpc_status edpc_config_load(const char* path, edpc_config** out) {
  if (edpc_status s = require(path && out, "edpc_config_load: null argument")) return s;
  return guarded([&] {
    auto cfg = std::make_unique<edpc_config>();
    cfg->map = econdeepc::ConfigMap::parse_file(path);
    // Fail fast on malformed experiments, not at first use.
    econdeepc::ExperimentConfig::from(cfg->map);
    *out = cfg.release();
  });
}

edpc_status edpc_config_set(edpc_config* cfg, const char* key, const char* value) {
  if (edpc_status s = require(cfg && key && value, "edpc_config_set: null argument")) return s;
  return guarded([&] {
    econdeepc::ConfigMap trial = cfg->map;
    trial.set(key, value);
    econdeepc::ExperimentConfig::from(trial);  // reject invalid overrides atomically
    cfg->map = std::move(trial);
  });
}

void edpc_config_free(edpc_config* cfg) { delete cfg; }

edpc_status edpc_generate_data(const edpc_config* cfg, const char* out_dir,
                               edpc_generate_report* report) {
  if (edpc_status s = require(cfg && out_dir, "edpc_generate_data: null argument")) return s;
  return guarded([&] {
    const auto ec = econdeepc::ExperimentConfig::from(cfg->map);
    const auto rep = econdeepc::pipeline::generate_data(ec, out_dir);
    if (report) {
      report->pe_ok = rep.pe.exciting ? 1 : 0;
      report->pe_rank = rep.pe.achieved_rank;
      report->pe_required = rep.pe.required_rank;
      report->n_windows = rep.n_windows;
      report->n_train = rep.n_train;
      report->n_val = rep.n_val;
      report->n_test = rep.n_test;
    }
  });
}

edpc_status edpc_train(const edpc_config* cfg, const char* dataset_dir, const char* model_path,
                       int run_grad_check, edpc_train_report* report) {
  if (edpc_status s = require(cfg && dataset_dir && model_path, "edpc_train: null argument"))
    return s;
  return guarded([&] {
    const auto ec = econdeepc::ExperimentConfig::from(cfg->map);
    const auto rep =
        econdeepc::pipeline::train_model(ec, dataset_dir, model_path, run_grad_check != 0);
    if (report) {
      report->best_epoch = rep.best_epoch;
      report->diverged = rep.diverged ? 1 : 0;
      report->final_train_loss = rep.final_train.total;
      report->final_val_loss = rep.final_val.total;
      report->grad_check_max_rel_err = rep.gradcheck ? rep.gradcheck->max_rel_err : -1.0;
    }
  });
}

edpc_status edpc_simulate(const edpc_config* cfg, const char* model_path,
                          const char* dataset_dir, const char* mode, const char* out_dir,
                          const uint64_t* seeds, int n_seeds, long long reduced_rank,
                          edpc_simulate_report* report) {
  if (edpc_status s = require(cfg && mode && out_dir, "edpc_simulate: null argument")) return s;
  return guarded([&] {
    const auto ec = econdeepc::ExperimentConfig::from(cfg->map);
    std::vector<std::uint64_t> seed_vec;
    for (int i = 0; i < n_seeds; ++i) seed_vec.push_back(seeds[i]);
    const auto rep = econdeepc::pipeline::simulate(
        ec, model_path ? model_path : "", dataset_dir ? dataset_dir : "", mode, out_dir,
        seed_vec, static_cast<Eigen::Index>(reduced_rank));
    if (report) {
      report->mean_avg_profit = rep.mean_avg_profit;
      report->std_avg_profit = rep.std_avg_profit;
      report->n_fallbacks = rep.n_fallbacks;
      report->total_solve_s = rep.total_solve_s;
    }
  });
}

edpc_status edpc_evaluate(const char* const* result_paths, int n_paths, const char* out_dir,
                          char* table_out, size_t table_cap) {
  if (edpc_status s = require(result_paths && n_paths > 0 && out_dir,
                              "edpc_evaluate: null or empty arguments"))
    return s;
  return guarded([&] {
    std::vector<std::string> inputs;
    for (int i = 0; i < n_paths; ++i) inputs.emplace_back(result_paths[i]);
    const auto rep = econdeepc::pipeline::evaluate(inputs, out_dir);
    if (table_out && table_cap > 0) {
      std::strncpy(table_out, rep.table.c_str(), table_cap - 1);
      table_out[table_cap - 1] = '\0';
    }
  });
}

edpc_status edpc_model_load(const char* path, edpc_model** out) {
  if (edpc_status s = require(path && out, "edpc_model_load: null argument")) return s;
  return guarded([&] {
    auto m = std::make_unique<edpc_model>();
    m->model = econdeepc::load_model(path);
    *out = m.release();
  });
}

void edpc_model_free(edpc_model* model) { delete model; }

edpc_status edpc_model_dims(const edpc_model* model, int* n_y, int* n_z, int* n_c) {
  if (edpc_status s = require(model != nullptr, "edpc_model_dims: null model")) return s;
  if (n_y) *n_y = static_cast<int>(model->model.n_y());
  if (n_z) *n_z = static_cast<int>(model->model.n_z());
  if (n_c) *n_c = static_cast<int>(model->model.n_c());
  return EDPC_OK;
}

edpc_status edpc_model_lift(const edpc_model* model, const double* y, int n_y, double* z_out,
                            int n_z) {
  if (edpc_status s = require(model && y && z_out, "edpc_model_lift: null argument")) return s;
  return guarded([&] {
    if (n_y != model->model.n_y() || n_z != model->model.n_z())
      econdeepc::fail(econdeepc::ErrorKind::invalid_argument,
                      "edpc_model_lift: dimension mismatch");
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y, n_y);
    Eigen::Map<Eigen::VectorXd>(z_out, n_z) = model->model.lift(yv);
  });
}

edpc_status edpc_model_stage_cost(const edpc_model* model, const double* z, int n_z,
                                  double* cost_out) {
  if (edpc_status s = require(model && z && cost_out, "edpc_model_stage_cost: null argument"))
    return s;
  return guarded([&] {
    if (n_z != model->model.n_z())
      econdeepc::fail(econdeepc::ErrorKind::invalid_argument,
                      "edpc_model_stage_cost: dimension mismatch");
    const Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z, n_z);
    *cost_out = model->model.cost_to_physical(econdeepc::approx_cost(model->model.head, zv));
  });
}

}  // extern "C"
