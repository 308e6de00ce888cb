#include "econdeepc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "econdeepc/error.hpp"
#include "econdeepc/io.hpp"
#include "econdeepc/rng.hpp"

namespace econdeepc {

const char* to_string(SplitTag t) {
  switch (t) {
    case SplitTag::unassigned: return "unassigned";
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  return "unknown";
}

SplitTag split_tag_from_string(const std::string& s) {
  if (s == "unassigned") return SplitTag::unassigned;
  if (s == "train") return SplitTag::train;
  if (s == "val") return SplitTag::val;
  if (s == "test") return SplitTag::test;
  fail(ErrorKind::parse, "unknown split tag '" + s + "'");
}

void Dataset::validate() const {
  hankel_traj.validate();
  if (tags.size() != windows.size())
    fail(ErrorKind::invalid_argument, "dataset: tag count must match window count");
  for (const auto& w : windows) {
    w.validate();
    if (w.length() != meta.L)
      fail(ErrorKind::invalid_argument, "dataset: window length differs from meta.L");
    if (w.n_u() != hankel_traj.n_u() || w.n_y() != hankel_traj.n_y())
      fail(ErrorKind::invalid_argument, "dataset: window dimensions differ from hankel trajectory");
  }
}

Eigen::Index Dataset::count(SplitTag t) const {
  return static_cast<Eigen::Index>(std::count(tags.begin(), tags.end(), t));
}

Eigen::MatrixXd excite(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                       Eigen::Index T, std::uint64_t seed) {
  if (lo.size() != hi.size() || lo.size() == 0)
    fail(ErrorKind::invalid_argument, "excite: empty or mismatched input box");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo(i) <= hi(i)) || !std::isfinite(lo(i)) || !std::isfinite(hi(i)))
      fail(ErrorKind::invalid_argument, "excite: input box must be finite with lo <= hi");
  if (T < 1) fail(ErrorKind::invalid_argument, "excite: T must be >= 1");

  Rng rng(seed);
  Eigen::MatrixXd U(T, lo.size());
  for (Eigen::Index k = 0; k < T; ++k)
    for (Eigen::Index i = 0; i < lo.size(); ++i) U(k, i) = rng.uniform(lo(i), hi(i));
  return U;
}

namespace {

Trajectory rollout(PlantSim& plant, const Eigen::MatrixXd& inputs, std::uint64_t noise_seed,
                   Eigen::Index first_step_of_run) {
  plant.reset(noise_seed);
  const Eigen::Index T = inputs.rows();
  Trajectory traj;
  traj.dt = plant.dt();
  traj.inputs = inputs;
  traj.outputs.resize(T, plant.n_y());
  traj.costs.resize(T);
  for (Eigen::Index k = 0; k < T; ++k) {
    const Eigen::VectorXd y = plant.output();
    const Eigen::VectorXd u = inputs.row(k).transpose();
    traj.outputs.row(k) = y.transpose();
    try {
      traj.costs(k) = plant.stage_value(u, y);
      plant.apply(u);
    } catch (const Error& e) {
      fail(ErrorKind::numeric,
           "generate: simulation failed at step " + std::to_string(first_step_of_run + k) +
               " (seed " + std::to_string(noise_seed) + "): " + e.what());
    }
  }
  return traj;
}

}  // namespace

Dataset generate(PlantSim& plant, Eigen::Index T_hankel, Eigen::Index n_window_samples,
                 Eigen::Index L, std::uint64_t seed) {
  if (L < 1) fail(ErrorKind::invalid_argument, "generate: L must be >= 1");
  if (T_hankel < L)
    fail(ErrorKind::invalid_argument, "generate: T_hankel must be at least L");
  if (n_window_samples < L)
    fail(ErrorKind::invalid_argument, "generate: need at least one window of samples");

  Dataset ds;
  ds.meta.seed = seed;
  ds.meta.dt = plant.dt();
  ds.meta.n_u = plant.n_u();
  ds.meta.n_y = plant.n_y();
  ds.meta.T_hankel = T_hankel;
  ds.meta.L = L;

  const Eigen::MatrixXd U_hankel =
      excite(plant.u_lo(), plant.u_hi(), T_hankel, derive_seed(seed, 0));
  ds.hankel_traj = rollout(plant, U_hankel, derive_seed(seed, 1), 0);

  const Eigen::Index n_windows = (n_window_samples + L - 1) / L;
  const Eigen::MatrixXd U_win =
      excite(plant.u_lo(), plant.u_hi(), n_windows * L, derive_seed(seed, 2));
  const Trajectory win_traj = rollout(plant, U_win, derive_seed(seed, 3), T_hankel);

  ds.windows.reserve(static_cast<std::size_t>(n_windows));
  for (Eigen::Index w = 0; w < n_windows; ++w) {
    Trajectory t;
    t.dt = plant.dt();
    t.inputs = win_traj.inputs.middleRows(w * L, L);
    t.outputs = win_traj.outputs.middleRows(w * L, L);
    t.costs = win_traj.costs.segment(w * L, L);
    ds.windows.push_back(std::move(t));
  }
  ds.tags.assign(ds.windows.size(), SplitTag::unassigned);
  ds.meta.n_windows = n_windows;

  {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    ds.meta.created = buf;
  }
  return ds;
}

void split(Dataset& ds, double r_train, double r_val, double r_test, std::uint64_t seed) {
  if (!(r_train > 0) || !(r_val >= 0) || !(r_test >= 0))
    fail(ErrorKind::invalid_argument, "split: ratios must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(ds.windows.size());
  if (n < 10) fail(ErrorKind::invalid_argument, "split: need at least 10 windows");

  const double total = r_train + r_val + r_test;
  const double shares[3] = {r_train / total, r_val / total, r_test / total};

  // Largest-remainder apportionment of the window count.
  Eigen::Index counts[3];
  double fracs[3];
  Eigen::Index assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = shares[i] * static_cast<double>(n);
    counts[i] = static_cast<Eigen::Index>(std::floor(exact));
    fracs[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (fracs[i] > fracs[best]) best = i;
    ++counts[best];
    fracs[best] = -1;
    ++assigned;
  }

  // Fisher-Yates permutation with our own RNG for cross-platform determinism.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const Eigen::Index j = static_cast<Eigen::Index>(rng.raw() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }

  Eigen::Index pos = 0;
  for (int part = 0; part < 3; ++part) {
    const SplitTag tag = part == 0 ? SplitTag::train : (part == 1 ? SplitTag::val : SplitTag::test);
    for (Eigen::Index k = 0; k < counts[part]; ++k)
      ds.tags[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos++)])] = tag;
  }

  std::ostringstream ratio;
  ratio << r_train << ':' << r_val << ':' << r_test;
  ds.meta.split_ratio = ratio.str();
  ds.meta.split_seed = seed;
}

namespace {

constexpr const char* kDataFile = "dataset.csv";
constexpr const char* kMetaFile = "dataset.meta";

std::string meta_to_text(const DatasetMeta& m) {
  std::ostringstream os;
  os << "format econdeepc-dataset v1\n";
  os << "seed " << m.seed << '\n';
  os << "dt " << format_double(m.dt) << '\n';
  os << "n_u " << m.n_u << '\n';
  os << "n_y " << m.n_y << '\n';
  os << "T_hankel " << m.T_hankel << '\n';
  os << "L " << m.L << '\n';
  os << "n_windows " << m.n_windows << '\n';
  os << "split_ratio " << (m.split_ratio.empty() ? "-" : m.split_ratio) << '\n';
  os << "split_seed " << m.split_seed << '\n';
  os << "noise_conc_std " << format_double(m.noise.conc_std) << '\n';
  os << "noise_conc_clip " << format_double(m.noise.conc_clip) << '\n';
  os << "noise_temp_std " << format_double(m.noise.temp_std) << '\n';
  os << "noise_temp_clip " << format_double(m.noise.temp_clip) << '\n';
  os << "created " << (m.created.empty() ? "-" : m.created) << '\n';
  return os.str();
}

DatasetMeta meta_from_text(const std::string& text, const std::string& path) {
  DatasetMeta m;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool format_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto sp = line.find(' ');
    const std::string key = sp == std::string::npos ? line : line.substr(0, sp);
    const std::string val = sp == std::string::npos ? "" : trim(line.substr(sp + 1));
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (key == "format") {
      if (val != "econdeepc-dataset v1")
        fail(ErrorKind::parse, ctx + ": unsupported dataset format '" + val + "'");
      format_seen = true;
    } else if (key == "seed") m.seed = static_cast<std::uint64_t>(parse_int(val, ctx));
    else if (key == "dt") m.dt = parse_double(val, ctx);
    else if (key == "n_u") m.n_u = parse_int(val, ctx);
    else if (key == "n_y") m.n_y = parse_int(val, ctx);
    else if (key == "T_hankel") m.T_hankel = parse_int(val, ctx);
    else if (key == "L") m.L = parse_int(val, ctx);
    else if (key == "n_windows") m.n_windows = parse_int(val, ctx);
    else if (key == "split_ratio") m.split_ratio = val == "-" ? "" : val;
    else if (key == "split_seed") m.split_seed = static_cast<std::uint64_t>(parse_int(val, ctx));
    else if (key == "noise_conc_std") m.noise.conc_std = parse_double(val, ctx);
    else if (key == "noise_conc_clip") m.noise.conc_clip = parse_double(val, ctx);
    else if (key == "noise_temp_std") m.noise.temp_std = parse_double(val, ctx);
    else if (key == "noise_temp_clip") m.noise.temp_clip = parse_double(val, ctx);
    else if (key == "created") m.created = val == "-" ? "" : val;
    else fail(ErrorKind::parse, ctx + ": unknown metadata key '" + key + "'");
  }
  if (!format_seen) fail(ErrorKind::parse, path + ": missing 'format' line");
  return m;
}

void append_rows(std::ostringstream& os, const Trajectory& t, Eigen::Index traj_id,
                 SplitTag tag) {
  for (Eigen::Index k = 0; k < t.length(); ++k) {
    os << traj_id << ',' << k;
    for (Eigen::Index i = 0; i < t.n_u(); ++i) os << ',' << format_double(t.inputs(k, i));
    for (Eigen::Index i = 0; i < t.n_y(); ++i) os << ',' << format_double(t.outputs(k, i));
    os << ',' << format_double(t.costs(k));
    os << ',' << (traj_id == 0 ? "hankel" : to_string(tag));
    os << '\n';
  }
}

}  // namespace

void save(const Dataset& ds, const std::string& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);

  std::ostringstream os;
  os << "traj,step";
  for (Eigen::Index i = 0; i < ds.meta.n_u; ++i) os << ",u" << i;
  for (Eigen::Index i = 0; i < ds.meta.n_y; ++i) os << ",y" << i;
  os << ",c,split\n";
  append_rows(os, ds.hankel_traj, 0, SplitTag::unassigned);
  for (std::size_t w = 0; w < ds.windows.size(); ++w)
    append_rows(os, ds.windows[w], static_cast<Eigen::Index>(w) + 1, ds.tags[w]);

  write_text_file((std::filesystem::path(dir) / kDataFile).string(), os.str());
  write_text_file((std::filesystem::path(dir) / kMetaFile).string(), meta_to_text(ds.meta));
}

Dataset load(const std::string& dir) {
  const std::string meta_path = (std::filesystem::path(dir) / kMetaFile).string();
  const std::string data_path = (std::filesystem::path(dir) / kDataFile).string();

  Dataset ds;
  ds.meta = meta_from_text(read_text_file(meta_path), meta_path);
  const Eigen::Index n_u = ds.meta.n_u, n_y = ds.meta.n_y;
  if (n_u < 1 || n_y < 1) fail(ErrorKind::parse, meta_path + ": bad dimensions");

  std::istringstream is(read_text_file(data_path));
  std::string line;
  int lineno = 0;

  if (!std::getline(is, line)) fail(ErrorKind::parse, data_path + ": empty file");
  ++lineno;
  {
    const auto fields = split_fields(trim(line), ',');
    std::vector<std::string> expected = {"traj", "step"};
    for (Eigen::Index i = 0; i < n_u; ++i) expected.push_back("u" + std::to_string(i));
    for (Eigen::Index i = 0; i < n_y; ++i) expected.push_back("y" + std::to_string(i));
    expected.push_back("c");
    expected.push_back("split");
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i >= fields.size() || trim(fields[i]) != expected[i])
        fail(ErrorKind::parse,
             data_path + ":1: missing or misplaced column '" + expected[i] + "'");
    }
    if (fields.size() != expected.size())
      fail(ErrorKind::parse, data_path + ":1: unexpected extra columns");
  }

  struct Raw {
    std::vector<Eigen::VectorXd> u, y;
    std::vector<double> c;
    SplitTag tag = SplitTag::unassigned;
  };
  std::vector<Raw> trajs;

  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_fields(t, ',');
    const std::string ctx = data_path + ":" + std::to_string(lineno);
    if (static_cast<Eigen::Index>(fields.size()) != 2 + n_u + n_y + 2)
      fail(ErrorKind::parse, ctx + ": wrong field count");
    const Eigen::Index traj_id = parse_int(fields[0], ctx);
    const Eigen::Index step = parse_int(fields[1], ctx);
    if (traj_id < 0) fail(ErrorKind::parse, ctx + ": negative trajectory id");
    if (static_cast<std::size_t>(traj_id) >= trajs.size())
      trajs.resize(static_cast<std::size_t>(traj_id) + 1);
    Raw& r = trajs[static_cast<std::size_t>(traj_id)];
    if (step != static_cast<Eigen::Index>(r.c.size()))
      fail(ErrorKind::parse, ctx + ": steps of trajectory " + std::to_string(traj_id) +
                                 " are out of order");
    Eigen::VectorXd u(n_u), y(n_y);
    for (Eigen::Index i = 0; i < n_u; ++i) u(i) = parse_double(fields[2 + i], ctx);
    for (Eigen::Index i = 0; i < n_y; ++i) y(i) = parse_double(fields[2 + n_u + i], ctx);
    r.u.push_back(u);
    r.y.push_back(y);
    r.c.push_back(parse_double(fields[2 + n_u + n_y], ctx));
    const std::string tag = trim(fields[2 + n_u + n_y + 1]);
    r.tag = traj_id == 0 ? SplitTag::unassigned : split_tag_from_string(tag);
  }

  if (trajs.empty()) fail(ErrorKind::parse, data_path + ": no data rows");

  auto to_traj = [&](const Raw& r) {
    Trajectory t;
    t.dt = ds.meta.dt;
    const Eigen::Index T = static_cast<Eigen::Index>(r.c.size());
    t.inputs.resize(T, n_u);
    t.outputs.resize(T, n_y);
    t.costs.resize(T);
    for (Eigen::Index k = 0; k < T; ++k) {
      t.inputs.row(k) = r.u[static_cast<std::size_t>(k)].transpose();
      t.outputs.row(k) = r.y[static_cast<std::size_t>(k)].transpose();
      t.costs(k) = r.c[static_cast<std::size_t>(k)];
    }
    return t;
  };

  ds.hankel_traj = to_traj(trajs[0]);
  for (std::size_t w = 1; w < trajs.size(); ++w) {
    ds.windows.push_back(to_traj(trajs[w]));
    ds.tags.push_back(trajs[w].tag);
  }
  ds.validate();
  if (static_cast<Eigen::Index>(ds.windows.size()) != ds.meta.n_windows)
    fail(ErrorKind::parse, data_path + ": window count disagrees with metadata");
  return ds;
}

}  // namespace econdeepc
