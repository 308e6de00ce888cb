#include "econdeepc/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "econdeepc/error.hpp"
#include "econdeepc/io.hpp"

namespace econdeepc {

ConfigMap ConfigMap::parse_file(const std::string& path) {
  return parse_string(read_text_file(path), path);
}

ConfigMap ConfigMap::parse_string(const std::string& text, const std::string& name) {
  ConfigMap map;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string ctx = name + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') fail(ErrorKind::parse, ctx + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) fail(ErrorKind::parse, ctx + ": empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::parse, ctx + ": expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::parse, ctx + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!seen.insert(full).second)
      fail(ErrorKind::parse, ctx + ": duplicate key '" + full + "'");
    map.entries_.emplace_back(full, value);
  }
  return map;
}

std::string ConfigMap::serialize() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [full, value] : entries_) {
    const auto dot = full.rfind('.');
    const std::string sec = dot == std::string::npos ? "" : full.substr(0, dot);
    const std::string key = dot == std::string::npos ? full : full.substr(dot + 1);
    if (sec != section) {
      if (!section.empty() || !os.str().empty()) os << '\n';
      if (!sec.empty()) os << '[' << sec << "]\n";
      section = sec;
    }
    os << key << " = " << value << '\n';
  }
  return os.str();
}

bool ConfigMap::has(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

std::string ConfigMap::get_string(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  fail(ErrorKind::invalid_argument, "config: missing key '" + key + "'");
}

std::string ConfigMap::get_string_or(const std::string& key, const std::string& def) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return def;
}

double ConfigMap::get_double(const std::string& key) const {
  return parse_double(get_string(key), "config key '" + key + "'");
}

double ConfigMap::get_double_or(const std::string& key, double def) const {
  return has(key) ? get_double(key) : def;
}

long long ConfigMap::get_int(const std::string& key) const {
  return parse_int(get_string(key), "config key '" + key + "'");
}

long long ConfigMap::get_int_or(const std::string& key, long long def) const {
  return has(key) ? get_int(key) : def;
}

Eigen::VectorXd ConfigMap::get_vector(const std::string& key, Eigen::Index expected) const {
  std::istringstream is(get_string(key));
  std::vector<double> vals;
  std::string tok;
  while (is >> tok) {
    if (tok == "inf" || tok == "+inf")
      vals.push_back(std::numeric_limits<double>::infinity());
    else if (tok == "-inf")
      vals.push_back(-std::numeric_limits<double>::infinity());
    else
      vals.push_back(parse_double(tok, "config key '" + key + "'"));
  }
  if (expected >= 0 && static_cast<Eigen::Index>(vals.size()) != expected)
    fail(ErrorKind::invalid_argument,
         "config: key '" + key + "' needs " + std::to_string(expected) + " values, got " +
             std::to_string(vals.size()));
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "plant.dt", "plant.n_substeps", "plant.x0", "plant.u_lo", "plant.u_hi",
      "plant.params.V1", "plant.params.V2", "plant.params.F1", "plant.params.F2",
      "plant.params.T10", "plant.params.T20", "plant.params.k0", "plant.params.E",
      "plant.params.R", "plant.params.dH", "plant.params.rho", "plant.params.cp",
      "plant.noise.conc_std", "plant.noise.conc_clip", "plant.noise.temp_std",
      "plant.noise.temp_clip",
      "data.T_hankel", "data.n_window_samples", "data.seed", "data.split", "data.split_seed",
      "training.n_z", "training.hidden_width", "training.hidden_layers", "training.epochs",
      "training.batch_size", "training.learning_rate", "training.alpha", "training.sign",
      "training.seed", "training.yc_channels",
      "controller.T_ini", "controller.N_p", "controller.beta", "controller.r_du",
      "controller.R_diag", "controller.lambda_g", "controller.yc_lo", "controller.yc_hi",
      "controller.qp_tol", "controller.qp_max_iters", "controller.soft_init_penalty",
      "controller.y_ref", "controller.u_ref",
      "evaluation.steps", "evaluation.n_seeds", "evaluation.seed0", "evaluation.threads",
      "evaluation.warmup_input", "evaluation.label",
  };
  return keys;
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const ConfigMap& map) {
  for (const auto& [k, v] : map.entries())
    if (known_keys().find(k) == known_keys().end())
      fail(ErrorKind::invalid_argument, "config: unknown key '" + k + "'");

  ExperimentConfig c;
  c.dt = map.get_double("plant.dt");
  c.n_substeps = static_cast<int>(map.get_int_or("plant.n_substeps", 10));
  c.x0 = CstrState::from_vector(map.get_vector("plant.x0", 4));
  c.u_lo = map.get_vector("plant.u_lo", 4);
  c.u_hi = map.get_vector("plant.u_hi", 4);

  c.params.V1 = map.get_double("plant.params.V1");
  c.params.V2 = map.get_double("plant.params.V2");
  c.params.F1 = map.get_double("plant.params.F1");
  c.params.F2 = map.get_double("plant.params.F2");
  c.params.T10 = map.get_double("plant.params.T10");
  c.params.T20 = map.get_double("plant.params.T20");
  c.params.k0 = map.get_double("plant.params.k0");
  c.params.E = map.get_double("plant.params.E");
  c.params.R = map.get_double("plant.params.R");
  c.params.dH = map.get_double("plant.params.dH");
  c.params.rho = map.get_double("plant.params.rho");
  c.params.cp = map.get_double("plant.params.cp");

  c.noise.conc_std = map.get_double_or("plant.noise.conc_std", 0.0);
  c.noise.conc_clip = map.get_double_or("plant.noise.conc_clip", 1.0);
  c.noise.temp_std = map.get_double_or("plant.noise.temp_std", 0.0);
  c.noise.temp_clip = map.get_double_or("plant.noise.temp_clip", 50.0);

  c.T_hankel = map.get_int("data.T_hankel");
  c.n_window_samples = map.get_int("data.n_window_samples");
  c.data_seed = static_cast<std::uint64_t>(map.get_int_or("data.seed", 0));
  {
    const std::string ratio = map.get_string_or("data.split", "7:2:1");
    const auto parts = split_fields(ratio, ':');
    if (parts.size() != 3)
      fail(ErrorKind::invalid_argument,
           "config: data.split must be three colon-separated numbers, got '" + ratio + "'");
    c.split_train = parse_double(trim(parts[0]), "data.split");
    c.split_val = parse_double(trim(parts[1]), "data.split");
    c.split_test = parse_double(trim(parts[2]), "data.split");
  }
  c.split_seed = static_cast<std::uint64_t>(map.get_int_or("data.split_seed", 1));

  c.training.n_z = map.get_int_or("training.n_z", 10);
  c.training.hidden_width = map.get_int_or("training.hidden_width", 128);
  c.training.hidden_layers = static_cast<int>(map.get_int_or("training.hidden_layers", 2));
  c.training.epochs = static_cast<int>(map.get_int_or("training.epochs", 100));
  {
    // The config counts batch size in time samples, the unit the data sizes
    // are quoted in; one training item is an L-step window.
    const long long batch_samples = map.get_int_or("training.batch_size", 100);
    const Eigen::Index L = map.get_int_or("controller.T_ini", 2) + map.get_int_or("controller.N_p", 5);
    c.training.batch_size = static_cast<int>(std::max<long long>(1, batch_samples / L));
  }
  c.training.learning_rate = map.get_double_or("training.learning_rate", 1e-3);
  if (map.has("training.alpha")) {
    const Eigen::VectorXd a = map.get_vector("training.alpha", 3);
    c.training.weights = {a(0), a(1), a(2)};
  }
  c.training.sign = cost_sign_from_string(map.get_string_or("training.sign", "maximize"));
  c.training.seed = static_cast<std::uint64_t>(map.get_int_or("training.seed", 0));
  if (map.has("training.yc_channels")) {
    const Eigen::VectorXd ch = map.get_vector("training.yc_channels");
    for (Eigen::Index i = 0; i < ch.size(); ++i)
      c.training.yc_idx.push_back(static_cast<int>(ch(i)));
  }

  c.controller.T_ini = map.get_int_or("controller.T_ini", 2);
  c.controller.N_p = map.get_int_or("controller.N_p", 5);
  c.controller.u_lo = c.u_lo;
  c.controller.u_hi = c.u_hi;
  c.controller.beta = map.get_double_or("controller.beta", 1.0);
  if (map.has("controller.R_diag")) {
    const Eigen::VectorXd d = map.get_vector("controller.R_diag", 4);
    c.controller.R = d.asDiagonal();
  } else {
    c.controller.R = map.get_double_or("controller.r_du", 0.1) * Eigen::MatrixXd::Identity(4, 4);
  }
  c.controller.lambda_g = map.get_double_or("controller.lambda_g", 1e-4);
  if (map.has("controller.yc_lo") != map.has("controller.yc_hi"))
    fail(ErrorKind::invalid_argument, "config: yc_lo and yc_hi must be given together");
  if (map.has("controller.yc_lo")) {
    c.controller.yc_lo = map.get_vector("controller.yc_lo");
    c.controller.yc_hi = map.get_vector("controller.yc_hi");
  }
  c.controller.qp.tol_primal = c.controller.qp.tol_dual =
      map.get_double_or("controller.qp_tol", 1e-6);
  c.controller.qp.max_iters = static_cast<int>(map.get_int_or("controller.qp_max_iters", 20000));
  c.controller.soft_init_penalty = map.get_double_or("controller.soft_init_penalty", 1e4);
  if (map.has("controller.y_ref")) c.y_ref = map.get_vector("controller.y_ref", 4);
  if (map.has("controller.u_ref")) c.u_ref = map.get_vector("controller.u_ref", 4);

  c.steps = static_cast<int>(map.get_int_or("evaluation.steps", 100));
  c.n_seeds = static_cast<int>(map.get_int_or("evaluation.n_seeds", 20));
  c.seed0 = static_cast<std::uint64_t>(map.get_int_or("evaluation.seed0", 1000));
  c.threads = static_cast<int>(map.get_int_or("evaluation.threads", 0));
  if (map.has("evaluation.warmup_input") &&
      map.get_string("evaluation.warmup_input") != "mid")
    c.warmup_input = map.get_vector("evaluation.warmup_input", 4);
  c.label = map.get_string_or("evaluation.label", "default");

  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (!(dt > 0)) fail(ErrorKind::invalid_argument, "config: plant.dt must be > 0");
  if (n_substeps < 1) fail(ErrorKind::invalid_argument, "config: plant.n_substeps must be >= 1");
  params.validate();
  noise.validate();
  for (Eigen::Index i = 0; i < 4; ++i)
    if (!(u_lo(i) < u_hi(i)))
      fail(ErrorKind::invalid_argument, "config: plant input box must have u_lo < u_hi");
  const Eigen::Index L = controller.T_ini + controller.N_p;
  if (T_hankel < L)
    fail(ErrorKind::invalid_argument, "config: data.T_hankel must be at least T_ini + N_p");
  if (n_window_samples < L)
    fail(ErrorKind::invalid_argument, "config: data.n_window_samples must be at least one window");
  if (!(split_train > 0) || split_val < 0 || split_test < 0)
    fail(ErrorKind::invalid_argument, "config: bad split ratio");
  training.validate();
  controller.validate(4);
  if (steps < 1 || n_seeds < 1)
    fail(ErrorKind::invalid_argument, "config: evaluation.steps and n_seeds must be >= 1");
  if (warmup_input.size() != 0 && warmup_input.size() != 4)
    fail(ErrorKind::invalid_argument, "config: warmup_input needs 4 values");
}

Eigen::VectorXd ExperimentConfig::mid_input() const {
  Eigen::VectorXd mid(u_lo.size());
  for (Eigen::Index i = 0; i < u_lo.size(); ++i) mid(i) = 0.5 * (u_lo(i) + u_hi(i));
  return mid;
}

std::vector<std::uint64_t> ExperimentConfig::evaluation_seeds() const {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(n_seeds));
  for (int k = 0; k < n_seeds; ++k) seeds.push_back(seed0 + static_cast<std::uint64_t>(k));
  return seeds;
}

}  // namespace econdeepc
