#include "econdeepc/model.hpp"

#include <cmath>
#include <sstream>

#include "econdeepc/error.hpp"
#include "econdeepc/io.hpp"

namespace econdeepc {

const char* to_string(CostSign s) {
  return s == CostSign::minimize ? "minimize" : "maximize";
}

CostSign cost_sign_from_string(const std::string& s) {
  if (s == "minimize" || s == "cost") return CostSign::minimize;
  if (s == "maximize" || s == "profit") return CostSign::maximize;
  fail(ErrorKind::parse, "unknown cost sign '" + s + "' (expected minimize|maximize)");
}

double approx_cost(const CostHead& head, const Eigen::VectorXd& z) {
  if (z.size() != head.n_z())
    fail(ErrorKind::invalid_argument, "approx_cost: z dimension mismatch");
  const Eigen::VectorXd d = head.curvature();
  return z.dot(d.asDiagonal() * z) + head.P.dot(z) + head.b;
}

Eigen::VectorXd approx_cost(const CostHead& head, const Eigen::MatrixXd& z_rows) {
  if (z_rows.cols() != head.n_z())
    fail(ErrorKind::invalid_argument, "approx_cost: z dimension mismatch");
  const Eigen::VectorXd d = head.curvature();
  return (z_rows.array().square().matrix() * d) + (z_rows * head.P.transpose()) +
         Eigen::VectorXd::Constant(z_rows.rows(), head.b);
}

Eigen::MatrixXd LiftingModel::normalize_y(const Eigen::MatrixXd& y_rows) const {
  if (y_rows.cols() != n_y())
    fail(ErrorKind::invalid_argument, "LiftingModel: output width mismatch");
  return (y_rows.rowwise() - y_mean.transpose()).array().rowwise() /
         y_std.transpose().array();
}

Eigen::VectorXd LiftingModel::lift(const Eigen::VectorXd& y) const {
  return lift(Eigen::MatrixXd(y.transpose())).row(0);
}

Eigen::MatrixXd LiftingModel::lift(const Eigen::MatrixXd& y_rows) const {
  return net.forward(normalize_y(y_rows));
}

Eigen::VectorXd LiftingModel::reconstruct(const Eigen::VectorXd& z) const {
  if (z.size() != n_z()) fail(ErrorKind::invalid_argument, "reconstruct: z dimension mismatch");
  return G * z;
}

Eigen::VectorXd LiftingModel::yc_bound_to_normalized(const Eigen::VectorXd& bound) const {
  if (bound.size() != n_c())
    fail(ErrorKind::invalid_argument, "yc bound size mismatch");
  Eigen::VectorXd out(bound.size());
  for (Eigen::Index i = 0; i < bound.size(); ++i) {
    const int ch = yc_idx[static_cast<std::size_t>(i)];
    if (std::isfinite(bound(i)))
      out(i) = (bound(i) - y_mean(ch)) / y_std(ch);
    else
      out(i) = bound(i);
  }
  return out;
}

void LiftingModel::validate() const {
  if (net.layers().empty()) fail(ErrorKind::invalid_argument, "model: empty network");
  if (head.n_z() != n_z() || head.P.size() != n_z())
    fail(ErrorKind::invalid_argument, "model: cost head dimension mismatch");
  if (G.cols() != n_z()) fail(ErrorKind::invalid_argument, "model: G column count mismatch");
  if (static_cast<Eigen::Index>(yc_idx.size()) != G.rows())
    fail(ErrorKind::invalid_argument, "model: yc_idx / G row mismatch");
  for (int ch : yc_idx)
    if (ch < 0 || ch >= n_y())
      fail(ErrorKind::invalid_argument, "model: yc channel out of range");
  if (y_mean.size() != n_y() || y_std.size() != n_y())
    fail(ErrorKind::invalid_argument, "model: normalization statistics size mismatch");
  if ((y_std.array() <= 0.0).any() || !(c_std > 0.0))
    fail(ErrorKind::invalid_argument, "model: standard deviations must be positive");
}

LiftingModel LiftingModel::identity(Eigen::Index n_y, CostSign sign) {
  LiftingModel m;
  Rng rng(0);
  m.net = Mlp({n_y, n_y}, rng);
  m.net.layers()[0].W = Eigen::MatrixXd::Identity(n_y, n_y);
  m.net.layers()[0].b.setZero();
  m.head.q = Eigen::VectorXd::Zero(n_y);
  m.head.P = Eigen::RowVectorXd::Zero(n_y);
  m.head.b = 0.0;
  m.head.sign = sign;
  m.G = Eigen::MatrixXd::Identity(n_y, n_y);
  m.yc_idx.resize(static_cast<std::size_t>(n_y));
  for (Eigen::Index i = 0; i < n_y; ++i) m.yc_idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
  m.y_mean = Eigen::VectorXd::Zero(n_y);
  m.y_std = Eigen::VectorXd::Ones(n_y);
  m.fingerprint = "identity";
  return m;
}

namespace {

constexpr const char* kModelMagic = "econdeepc-model";
constexpr int kModelVersion = 1;

void write_matrix(std::ostringstream& os, const std::string& name, const Eigen::MatrixXd& M) {
  os << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j > 0) os << ' ';
      os << format_double(M(i, j));
    }
    os << '\n';
  }
}

class LineReader {
 public:
  LineReader(const std::string& text, std::string path)
      : stream_(text), path_(std::move(path)) {}

  std::string next(const std::string& what) {
    std::string line;
    while (std::getline(stream_, line)) {
      ++lineno_;
      line = trim(line);
      if (!line.empty()) return line;
    }
    fail(ErrorKind::parse, path_ + ": unexpected end of file, expected " + what);
  }

  std::string context() const { return path_ + ":" + std::to_string(lineno_); }

 private:
  std::istringstream stream_;
  std::string path_;
  int lineno_ = 0;
};

Eigen::MatrixXd read_matrix(LineReader& r, const std::string& name) {
  const std::string header = r.next(name + " header");
  std::istringstream hs(header);
  std::string tag;
  Eigen::Index rows = 0, cols = 0;
  hs >> tag >> rows >> cols;
  if (tag != name || hs.fail())
    fail(ErrorKind::parse, r.context() + ": expected '" + name + " <rows> <cols>', got '" + header + "'");
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::string line = r.next(name + " row");
    std::istringstream ls(line);
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::string tok;
      if (!(ls >> tok))
        fail(ErrorKind::parse, r.context() + ": row of '" + name + "' too short");
      M(i, j) = parse_double(tok, r.context());
    }
  }
  return M;
}

std::string read_kv(LineReader& r, const std::string& key) {
  const std::string line = r.next(key);
  const auto sp = line.find(' ');
  const std::string k = sp == std::string::npos ? line : line.substr(0, sp);
  if (k != key)
    fail(ErrorKind::parse, r.context() + ": expected '" + key + "', got '" + k + "'");
  return sp == std::string::npos ? "" : trim(line.substr(sp + 1));
}

}  // namespace

void save_model(const LiftingModel& model, const std::string& path) {
  model.validate();
  std::ostringstream os;
  os << kModelMagic << " v" << kModelVersion << '\n';
  os << "fingerprint " << (model.fingerprint.empty() ? "-" : model.fingerprint) << '\n';
  os << "sign " << to_string(model.head.sign) << '\n';
  os << "n_y " << model.n_y() << '\n';
  os << "n_z " << model.n_z() << '\n';
  os << "yc_idx";
  for (int ch : model.yc_idx) os << ' ' << ch;
  os << '\n';
  os << "y_mean " << join_doubles(model.y_mean) << '\n';
  os << "y_std " << join_doubles(model.y_std) << '\n';
  os << "c_mean " << format_double(model.c_mean) << '\n';
  os << "c_std " << format_double(model.c_std) << '\n';
  os << "layers " << model.net.layers().size() << '\n';
  for (std::size_t k = 0; k < model.net.layers().size(); ++k) {
    write_matrix(os, "W" + std::to_string(k), model.net.layers()[k].W);
    write_matrix(os, "b" + std::to_string(k), model.net.layers()[k].b);
  }
  write_matrix(os, "q", model.head.q);
  write_matrix(os, "P", model.head.P);
  os << "b " << format_double(model.head.b) << '\n';
  write_matrix(os, "G", model.G);
  write_text_file(path, os.str());
}

LiftingModel load_model(const std::string& path) {
  LineReader r(read_text_file(path), path);

  const std::string magic = r.next("header");
  {
    std::istringstream ms(magic);
    std::string tag, ver;
    ms >> tag >> ver;
    if (tag != kModelMagic)
      fail(ErrorKind::parse, path + ": not a model file (bad magic '" + tag + "')");
    if (ver != "v" + std::to_string(kModelVersion))
      fail(ErrorKind::parse, path + ": unsupported model format version '" + ver +
                                 "' (this build reads v" + std::to_string(kModelVersion) + ")");
  }

  LiftingModel m;
  m.fingerprint = read_kv(r, "fingerprint");
  if (m.fingerprint == "-") m.fingerprint.clear();
  m.head.sign = cost_sign_from_string(read_kv(r, "sign"));
  const Eigen::Index n_y = parse_int(read_kv(r, "n_y"), path);
  const Eigen::Index n_z = parse_int(read_kv(r, "n_z"), path);
  {
    std::istringstream is(read_kv(r, "yc_idx"));
    int ch;
    while (is >> ch) m.yc_idx.push_back(ch);
  }
  const auto mean = parse_double_list(read_kv(r, "y_mean"), path);
  const auto stdv = parse_double_list(read_kv(r, "y_std"), path);
  m.y_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.y_std = Eigen::Map<const Eigen::VectorXd>(stdv.data(), static_cast<Eigen::Index>(stdv.size()));
  m.c_mean = parse_double(read_kv(r, "c_mean"), path);
  m.c_std = parse_double(read_kv(r, "c_std"), path);

  const long long n_layers = parse_int(read_kv(r, "layers"), path);
  m.net.layers().clear();
  for (long long k = 0; k < n_layers; ++k) {
    DenseLayer l;
    l.W = read_matrix(r, "W" + std::to_string(k));
    l.b = read_matrix(r, "b" + std::to_string(k));
    m.net.layers().push_back(std::move(l));
  }
  m.head.q = read_matrix(r, "q");
  m.head.P = read_matrix(r, "P");
  m.head.b = parse_double(read_kv(r, "b"), path);
  m.G = read_matrix(r, "G");

  if (m.n_y() != n_y || m.n_z() != n_z)
    fail(ErrorKind::parse, path + ": declared dimensions (n_y=" + std::to_string(n_y) +
                               ", n_z=" + std::to_string(n_z) +
                               ") disagree with stored parameter shapes");
  m.validate();
  return m;
}

void ModelGrads::setZero() {
  net.setZero();
  q.setZero();
  P.setZero();
  b = 0.0;
  G.setZero();
}

ModelGrads grads_shape(const LiftingModel& model) {
  ModelGrads g;
  g.net = model.net.grad_shape();
  g.q = Eigen::VectorXd::Zero(model.n_z());
  g.P = Eigen::RowVectorXd::Zero(model.n_z());
  g.b = 0.0;
  g.G = Eigen::MatrixXd::Zero(model.G.rows(), model.G.cols());
  return g;
}

Eigen::Index param_count(const LiftingModel& model) {
  Eigen::Index n = 0;
  for (const auto& l : model.net.layers()) n += l.W.size() + l.b.size();
  return n + model.head.q.size() + model.head.P.size() + 1 + model.G.size();
}

namespace {

// Dispatches a flat parameter index to the owning tensor; `visit(ptr)` runs
// with a pointer to the addressed coefficient.
template <typename Model, typename Fn>
auto with_param(Model& model, Eigen::Index idx, Fn&& visit) {
  for (auto& l : model.net.layers()) {
    if (idx < l.W.size()) return visit(l.W.data() + idx);
    idx -= l.W.size();
    if (idx < l.b.size()) return visit(l.b.data() + idx);
    idx -= l.b.size();
  }
  if (idx < model.head.q.size()) return visit(model.head.q.data() + idx);
  idx -= model.head.q.size();
  if (idx < model.head.P.size()) return visit(model.head.P.data() + idx);
  idx -= model.head.P.size();
  if (idx == 0) return visit(&model.head.b);
  idx -= 1;
  if (idx < model.G.size()) return visit(model.G.data() + idx);
  fail(ErrorKind::invalid_argument, "parameter index out of range");
}

}  // namespace

double get_param(const LiftingModel& model, Eigen::Index flat_index) {
  return with_param(const_cast<LiftingModel&>(model), flat_index,
                    [](double* p) { return *p; });
}

void add_to_param(LiftingModel& model, Eigen::Index flat_index, double delta) {
  with_param(model, flat_index, [delta](double* p) { *p += delta; return 0.0; });
}

double get_grad(const ModelGrads& grads, Eigen::Index flat_index) {
  Eigen::Index idx = flat_index;
  for (const auto& l : grads.net.layers) {
    if (idx < l.W.size()) return l.W.data()[idx];
    idx -= l.W.size();
    if (idx < l.b.size()) return l.b.data()[idx];
    idx -= l.b.size();
  }
  if (idx < grads.q.size()) return grads.q(idx);
  idx -= grads.q.size();
  if (idx < grads.P.size()) return grads.P(idx);
  idx -= grads.P.size();
  if (idx == 0) return grads.b;
  idx -= 1;
  if (idx < grads.G.size()) return grads.G.data()[idx];
  fail(ErrorKind::invalid_argument, "gradient index out of range");
}

std::string describe_param(const LiftingModel& model, Eigen::Index flat_index) {
  Eigen::Index idx = flat_index;
  for (std::size_t k = 0; k < model.net.layers().size(); ++k) {
    const auto& l = model.net.layers()[k];
    if (idx < l.W.size())
      return "net.layer" + std::to_string(k) + ".W(" + std::to_string(idx % l.W.rows()) + "," +
             std::to_string(idx / l.W.rows()) + ")";
    idx -= l.W.size();
    if (idx < l.b.size()) return "net.layer" + std::to_string(k) + ".b(" + std::to_string(idx) + ")";
    idx -= l.b.size();
  }
  if (idx < model.head.q.size()) return "q(" + std::to_string(idx) + ")";
  idx -= model.head.q.size();
  if (idx < model.head.P.size()) return "P(" + std::to_string(idx) + ")";
  idx -= model.head.P.size();
  if (idx == 0) return "b";
  idx -= 1;
  return "G(" + std::to_string(idx % model.G.rows()) + "," + std::to_string(idx / model.G.rows()) + ")";
}

}  // namespace econdeepc
