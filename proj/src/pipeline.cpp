#include "econdeepc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "econdeepc/controller.hpp"
#include "econdeepc/error.hpp"
#include "econdeepc/io.hpp"

namespace econdeepc::pipeline {

namespace fs = std::filesystem;

namespace {

std::unique_ptr<CstrPlantSim> make_plant(const ExperimentConfig& cfg) {
  return std::make_unique<CstrPlantSim>(cfg.params, cfg.noise, cfg.x0,
                                        Eigen::Vector4d(cfg.u_lo), Eigen::Vector4d(cfg.u_hi),
                                        cfg.dt, cfg.n_substeps);
}

Eigen::VectorXd warmup_input(const ExperimentConfig& cfg) {
  return cfg.warmup_input.size() > 0 ? cfg.warmup_input : cfg.mid_input();
}

}  // namespace

GenerateReport generate_data(const ExperimentConfig& cfg, const std::string& out_dir) {
  auto plant = make_plant(cfg);
  const Eigen::Index L = cfg.controller.T_ini + cfg.controller.N_p;

  Dataset ds = generate(*plant, cfg.T_hankel, cfg.n_window_samples, L, cfg.data_seed);
  ds.meta.noise = cfg.noise;
  split(ds, cfg.split_train, cfg.split_val, cfg.split_test, cfg.split_seed);
  save(ds, out_dir);

  GenerateReport rep;
  // Persistent excitation at the order Willems' lemma needs: L + n_x.
  rep.pe = is_persistently_exciting(ds.hankel_traj.inputs, L + 4);
  rep.T_hankel = cfg.T_hankel;
  rep.n_windows = ds.meta.n_windows;
  rep.n_train = ds.count(SplitTag::train);
  rep.n_val = ds.count(SplitTag::val);
  rep.n_test = ds.count(SplitTag::test);
  rep.dataset_dir = out_dir;
  return rep;
}

TrainReport train_model(const ExperimentConfig& cfg, const std::string& dataset_dir,
                        const std::string& model_path, bool run_grad_check) {
  const Dataset ds = load(dataset_dir);
  const Eigen::VectorXd u_scale = input_scale_from_bounds(cfg.u_lo, cfg.u_hi);

  TrainResult tr = train(ds, cfg.training, u_scale);

  fs::path mp(model_path);
  if (mp.has_parent_path()) fs::create_directories(mp.parent_path());
  save_model(tr.model, model_path);

  std::ostringstream hist;
  hist << "epoch,train_total,val_total,train_econ,train_recon,train_linear\n";
  for (const auto& r : tr.history)
    hist << r.epoch << ',' << format_double(r.train.total) << ',' << format_double(r.val.total)
         << ',' << format_double(r.train.econ) << ',' << format_double(r.train.recon) << ','
         << format_double(r.train.linear) << '\n';
  const std::string history_path = model_path + ".history.csv";
  write_text_file(history_path, hist.str());

  TrainReport rep;
  rep.best_epoch = tr.best_epoch;
  if (!tr.history.empty()) {
    rep.final_train = tr.history.back().train;
    rep.final_val = tr.history.back().val;
  }
  rep.diverged = tr.diverged;
  rep.model_path = model_path;
  rep.history_path = history_path;

  if (run_grad_check) {
    std::vector<int> yc = cfg.training.yc_idx;
    if (yc.empty())
      for (Eigen::Index i = 0; i < ds.hankel_traj.n_y(); ++i) yc.push_back(static_cast<int>(i));
    const TrainingData data = prepare_training_data(ds, yc, u_scale);
    std::vector<int> probe = data.train_idx;
    if (probe.size() > 10) probe.resize(10);
    rep.gradcheck = finite_difference_check(tr.model, data, probe, cfg.training.weights, 100,
                                            derive_seed(cfg.training.seed, 12345));
  }
  return rep;
}

namespace {

std::unique_ptr<IController> make_controller(const ExperimentConfig& cfg, const std::string& mode,
                                             const ControlData* data, const LiftingModel* model) {
  if (mode == "constant") {
    return std::make_unique<ConstantController>(warmup_input(cfg), cfg.controller.N_p);
  }
  if (mode == "econ" || mode == "econ-reduced") {
    return std::make_unique<EconDeepcController>(*data, *model, cfg.controller);
  }
  if (mode == "tracking") {
    if (cfg.y_ref.size() == 0 || cfg.u_ref.size() == 0)
      fail(ErrorKind::invalid_argument,
           "tracking mode needs controller.y_ref and controller.u_ref in the config");
    const Eigen::Index n_y = data->blocks.n_z;
    const Eigen::Index n_u = data->blocks.n_u;
    TrackingObjective obj;
    obj.Q = Eigen::MatrixXd::Identity(n_y * cfg.controller.N_p, n_y * cfg.controller.N_p);
    obj.R = cfg.controller.R.replicate(1, 1);  // per-step R, expanded below
    obj.R = Eigen::MatrixXd::Zero(n_u * cfg.controller.N_p, n_u * cfg.controller.N_p);
    for (Eigen::Index j = 0; j < cfg.controller.N_p; ++j)
      obj.R.block(j * n_u, j * n_u, n_u, n_u) = cfg.controller.R;
    obj.y_ref = cfg.y_ref.replicate(cfg.controller.N_p, 1);
    obj.u_ref = cfg.u_ref.replicate(cfg.controller.N_p, 1);
    return std::make_unique<TrackingDeepcController>(*data, obj, cfg.controller);
  }
  fail(ErrorKind::invalid_argument, "unknown simulation mode '" + mode +
                                        "' (expected econ|econ-reduced|tracking|constant)");
}

}  // namespace

SimulateReport simulate(const ExperimentConfig& cfg, const std::string& model_path,
                        const std::string& dataset_dir, const std::string& mode,
                        const std::string& out_dir,
                        const std::vector<std::uint64_t>& seeds_override,
                        Eigen::Index reduced_rank) {
  fs::create_directories(out_dir);
  if (mode != "econ" && mode != "econ-reduced" && mode != "tracking" && mode != "constant")
    fail(ErrorKind::invalid_argument, "unknown simulation mode '" + mode +
                                          "' (expected econ|econ-reduced|tracking|constant)");
  if (mode == "tracking" && (cfg.y_ref.size() == 0 || cfg.u_ref.size() == 0))
    fail(ErrorKind::invalid_argument,
         "tracking mode needs controller.y_ref and controller.u_ref in the config");
  const std::vector<std::uint64_t> seeds =
      seeds_override.empty() ? cfg.evaluation_seeds() : seeds_override;

  // Offline artifacts shared by every seed.
  LiftingModel model;
  ControlData data;
  const bool needs_model = mode == "econ" || mode == "econ-reduced";
  const bool needs_data = needs_model || mode == "tracking";
  if (needs_data) {
    const Dataset ds = load(dataset_dir);
    const Eigen::VectorXd u_scale = input_scale_from_bounds(cfg.u_lo, cfg.u_hi);
    if (needs_model) {
      model = load_model(model_path);
      if (model.n_y() != ds.hankel_traj.n_y())
        fail(ErrorKind::invalid_argument, "simulate: model n_y disagrees with dataset");
    } else {
      model = LiftingModel::identity(ds.hankel_traj.n_y());
    }
    data = make_control_data(ds.hankel_traj, model, cfg.controller.T_ini, cfg.controller.N_p,
                             u_scale);
    if (mode == "econ-reduced") {
      RetentionSpec spec;
      if (reduced_rank > 0) spec.rank = reduced_rank;
      data = reduce_control_data(data, spec);
    }
  }

  std::vector<SimResult> results(seeds.size());
  std::vector<std::string> errors(seeds.size());

  int n_threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = std::min<int>(n_threads, static_cast<int>(seeds.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      try {
        auto plant = make_plant(cfg);
        auto controller = make_controller(cfg, mode, &data, &model);
        ClosedLoopOptions opts;
        opts.steps = cfg.steps;
        opts.seed = seeds[i];
        opts.T_ini = cfg.controller.T_ini;
        opts.warmup_input = warmup_input(cfg);
        SimResult r = run_closed_loop(*plant, *controller, opts);
        r.mode = mode;
        r.label = cfg.label;
        results[i] = std::move(r);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SimulateReport rep;
  rep.mode = mode;
  rep.seeds = seeds;
  std::vector<const SimResult*> ok;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!errors[i].empty()) {
      // Per-seed failures are logged and marked in the aggregate rather than
      // aborting the batch.
      std::fprintf(stderr, "simulate: seed %llu failed: %s\n",
                   static_cast<unsigned long long>(seeds[i]), errors[i].c_str());
      rep.failed_seeds.push_back(seeds[i]);
      continue;
    }
    const std::string path =
        (fs::path(out_dir) / ("sim_" + mode + "_seed" + std::to_string(seeds[i]) + ".csv"))
            .string();
    save_sim_result(results[i], path);
    rep.result_paths.push_back(path);
    rep.avg_profit.push_back(results[i].avg_profit);
    rep.n_fallbacks += results[i].n_fallbacks;
    rep.total_solve_s += results[i].total_solve_s;
    ok.push_back(&results[i]);
  }
  if (ok.empty()) fail(ErrorKind::numeric, "simulate: every seed failed (see log)");

  double mean = 0;
  for (double p : rep.avg_profit) mean += p;
  mean /= static_cast<double>(ok.size());
  double var = 0;
  for (double p : rep.avg_profit) var += (p - mean) * (p - mean);
  rep.mean_avg_profit = mean;
  rep.std_avg_profit = ok.size() > 1 ? std::sqrt(var / static_cast<double>(ok.size())) : 0.0;

  // Per-step profit mean/std across the seeds that completed.
  std::ostringstream agg;
  agg << "# econdeepc-aggregate v1\n";
  agg << "# mode " << mode << "\n# label " << cfg.label << "\n# n_seeds " << ok.size() << '\n';
  if (!rep.failed_seeds.empty()) {
    agg << "# missing_seeds";
    for (auto s : rep.failed_seeds) agg << ' ' << s;
    agg << '\n';
  }
  agg << "# mean_avg_profit " << format_double(rep.mean_avg_profit) << '\n';
  agg << "# std_avg_profit " << format_double(rep.std_avg_profit) << '\n';
  agg << "step,t,mean_profit,std_profit,n\n";
  const std::size_t steps = ok.empty() ? 0 : ok[0]->records.size();
  for (std::size_t k = 0; k < steps; ++k) {
    double m = 0;
    for (const auto* r : ok) m += r->records[k].profit;
    m /= static_cast<double>(ok.size());
    double v = 0;
    for (const auto* r : ok) v += (r->records[k].profit - m) * (r->records[k].profit - m);
    const double sd = ok.size() > 1 ? std::sqrt(v / static_cast<double>(ok.size())) : 0.0;
    agg << k << ',' << format_double(ok[0]->records[k].t) << ',' << format_double(m) << ','
        << format_double(sd) << ',' << ok.size() << '\n';
  }
  rep.aggregate_path = (fs::path(out_dir) / ("aggregate_" + mode + ".csv")).string();
  write_text_file(rep.aggregate_path, agg.str());
  return rep;
}

namespace {

struct RunGroup {
  std::vector<SimResult> runs;
};

bool is_simresult_file(const fs::path& p) {
  if (p.extension() != ".csv") return false;
  std::ifstream f(p);
  std::string first;
  std::getline(f, first);
  return first.rfind("# econdeepc-simresult", 0) == 0;
}

}  // namespace

EvaluateReport evaluate(const std::vector<std::string>& inputs, const std::string& out_dir) {
  if (inputs.empty()) fail(ErrorKind::invalid_argument, "evaluate: no inputs given");
  fs::create_directories(out_dir);

  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && is_simresult_file(e.path())) found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      fail(ErrorKind::io, "evaluate: no such file or directory '" + in + "'");
    }
  }
  if (files.empty()) fail(ErrorKind::invalid_argument, "evaluate: inputs contain no result files");

  // Group by (mode, label): rows = methods, columns = data cases.
  std::map<std::string, std::map<std::string, RunGroup>> grid;
  for (const auto& f : files) {
    SimResult r = load_sim_result(f);
    grid[r.mode.empty() ? "unknown" : r.mode][r.label.empty() ? "default" : r.label]
        .runs.push_back(std::move(r));
  }

  std::vector<std::string> labels;
  for (const auto& [mode, row] : grid)
    for (const auto& [label, g] : row)
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
  std::sort(labels.begin(), labels.end());

  auto run_average = [](const SimResult& r) {
    double s = 0;
    for (const auto& rec : r.records) s += rec.profit;
    return r.records.empty() ? 0.0 : s / static_cast<double>(r.records.size());
  };

  std::ostringstream table, csv;
  table << "Average economic profit (per-run time average, mean +- std over runs)\n\n";
  table << "method";
  for (const auto& l : labels) table << " | " << l;
  table << '\n';
  csv << "method,label,n_runs,mean_avg_profit,std_avg_profit\n";

  EvaluateReport rep;
  for (const auto& [mode, row] : grid) {
    table << mode;
    for (const auto& l : labels) {
      const auto it = row.find(l);
      if (it == row.end()) {
        table << " | -";
        continue;
      }
      const auto& runs = it->second.runs;
      double mean = 0;
      for (const auto& r : runs) mean += run_average(r);
      mean /= static_cast<double>(runs.size());
      double var = 0;
      for (const auto& r : runs) {
        const double a = run_average(r);
        var += (a - mean) * (a - mean);
      }
      const double sd = runs.size() > 1 ? std::sqrt(var / static_cast<double>(runs.size())) : 0.0;
      char cell[64];
      std::snprintf(cell, sizeof(cell), "%.4f +- %.4f", mean, sd);
      table << " | " << cell;
      csv << mode << ',' << l << ',' << runs.size() << ',' << format_double(mean) << ','
          << format_double(sd) << '\n';

      // Plot-ready series: per-step mean/std over runs.
      const std::size_t steps = runs.front().records.size();
      std::ostringstream series;
      series << "step,t,mean_profit,std_profit,n\n";
      for (std::size_t k = 0; k < steps; ++k) {
        double m = 0;
        std::size_t n = 0;
        for (const auto& r : runs)
          if (k < r.records.size()) {
            m += r.records[k].profit;
            ++n;
          }
        m /= static_cast<double>(n);
        double v = 0;
        for (const auto& r : runs)
          if (k < r.records.size()) v += (r.records[k].profit - m) * (r.records[k].profit - m);
        const double sd_k = n > 1 ? std::sqrt(v / static_cast<double>(n)) : 0.0;
        series << k << ',' << format_double(runs.front().records[k].t) << ',' << format_double(m)
               << ',' << format_double(sd_k) << ',' << n << '\n';
      }
      const std::string sp =
          (fs::path(out_dir) / ("profit_" + mode + "_" + l + ".csv")).string();
      write_text_file(sp, series.str());
      rep.series_paths.push_back(sp);
    }
    table << '\n';
  }

  rep.table = table.str();
  rep.summary_path = (fs::path(out_dir) / "summary.txt").string();
  rep.summary_csv_path = (fs::path(out_dir) / "summary.csv").string();
  write_text_file(rep.summary_path, rep.table);
  write_text_file(rep.summary_csv_path, csv.str());
  return rep;
}

}  // namespace econdeepc::pipeline
