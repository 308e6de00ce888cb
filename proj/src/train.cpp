#include "econdeepc/train.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "econdeepc/error.hpp"
#include "econdeepc/io.hpp"
#include "econdeepc/rng.hpp"

namespace econdeepc {

void TrainConfig::validate() const {
  weights.validate();
  if (epochs < 1) fail(ErrorKind::invalid_argument, "train: epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::invalid_argument, "train: batch size must be >= 1");
  if (!(learning_rate > 0)) fail(ErrorKind::invalid_argument, "train: learning rate must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
    fail(ErrorKind::invalid_argument, "train: Adam moment coefficients must lie in [0,1)");
  if (n_z < 1) fail(ErrorKind::invalid_argument, "train: n_z must be >= 1");
  if (hidden_width < 1 || hidden_layers < 0)
    fail(ErrorKind::invalid_argument, "train: bad architecture");
}

std::string TrainConfig::fingerprint() const {
  std::ostringstream os;
  os << weights.econ << '|' << weights.recon << '|' << weights.linear << '|' << epochs << '|'
     << batch_size << '|' << learning_rate << '|' << adam_beta1 << '|' << adam_beta2 << '|'
     << adam_eps << '|' << seed << '|' << n_z << '|' << hidden_width << '|' << hidden_layers
     << '|' << to_string(sign);
  for (int c : yc_idx) os << '|' << c;
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Applies fn(param_ptr, grad_ptr, count) to every parameter tensor, in the
// same fixed order as the flat index helpers in model.cpp.
template <typename Fn>
void for_each_tensor(LiftingModel& m, ModelGrads& g, Fn&& fn) {
  for (std::size_t k = 0; k < m.net.layers().size(); ++k) {
    fn(m.net.layers()[k].W.data(), g.net.layers[k].W.data(), m.net.layers()[k].W.size());
    fn(m.net.layers()[k].b.data(), g.net.layers[k].b.data(), m.net.layers()[k].b.size());
  }
  fn(m.head.q.data(), g.q.data(), m.head.q.size());
  fn(m.head.P.data(), g.P.data(), m.head.P.size());
  fn(&m.head.b, &g.b, Eigen::Index{1});
  fn(m.G.data(), g.G.data(), m.G.size());
}

struct Adam {
  Eigen::VectorXd m, v;
  long t = 0;

  explicit Adam(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void update(LiftingModel& model, ModelGrads& grads, const TrainConfig& cfg) {
    ++t;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    Eigen::Index at = 0;
    for_each_tensor(model, grads, [&](double* p, double* g, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double gi = g[i];
        m(at) = cfg.adam_beta1 * m(at) + (1.0 - cfg.adam_beta1) * gi;
        v(at) = cfg.adam_beta2 * v(at) + (1.0 - cfg.adam_beta2) * gi * gi;
        const double mh = m(at) / bc1;
        const double vh = v(at) / bc2;
        p[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
        ++at;
      }
    });
  }
};

}  // namespace

LiftingModel init_model(const TrainingData& data, const TrainConfig& cfg) {
  const Eigen::Index n_y = data.Y_T.cols();
  std::vector<Eigen::Index> sizes;
  sizes.push_back(n_y);
  for (int k = 0; k < cfg.hidden_layers; ++k) sizes.push_back(cfg.hidden_width);
  sizes.push_back(cfg.n_z);

  Rng rng(derive_seed(cfg.seed, 100));
  LiftingModel m;
  m.net = Mlp(sizes, rng);
  m.head.q = Eigen::VectorXd::Zero(cfg.n_z);
  m.head.P = Eigen::RowVectorXd::Zero(cfg.n_z);
  m.head.b = 0.0;
  m.head.sign = cfg.sign;
  m.yc_idx = data.yc_idx;
  m.y_mean = data.y_mean;
  m.y_std = data.y_std;
  m.c_mean = data.c_mean;
  m.c_std = data.c_std;
  m.fingerprint = cfg.fingerprint();

  // G starts at the least-squares reconstruction for the initial lift over
  // the fit rows (Hankel trajectory plus training windows).
  Eigen::Index n_rows = data.T();
  for (int w : data.train_idx)
    n_rows += data.windows[static_cast<std::size_t>(w)].Y.rows();
  Eigen::MatrixXd Y(n_rows, n_y);
  Eigen::MatrixXd Yc(n_rows, data.n_c());
  Y.topRows(data.T()) = data.Y_T;
  Yc.topRows(data.T()) = data.YcN_T;
  Eigen::Index at = data.T();
  for (int w : data.train_idx) {
    const auto& win = data.windows[static_cast<std::size_t>(w)];
    Y.middleRows(at, win.Y.rows()) = win.Y;
    Yc.middleRows(at, win.Y.rows()) = win.YcN;
    at += win.Y.rows();
  }
  const Eigen::MatrixXd Z = m.lift(Y);
  m.G = Z.completeOrthogonalDecomposition().solve(Yc).transpose();
  m.validate();
  return m;
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const Eigen::VectorXd& u_scale) {
  cfg.validate();
  std::vector<int> yc_idx = cfg.yc_idx;
  if (yc_idx.empty())
    for (Eigen::Index i = 0; i < ds.hankel_traj.n_y(); ++i) yc_idx.push_back(static_cast<int>(i));

  const TrainingData data = prepare_training_data(ds, yc_idx, u_scale);
  if (data.train_idx.empty() || data.val_idx.empty())
    fail(ErrorKind::invalid_argument, "train: dataset has no train/val split");

  TrainResult result;
  LiftingModel model = init_model(data, cfg);
  ModelGrads grads = grads_shape(model);
  Adam adam(param_count(model));
  Rng shuffle_rng(derive_seed(cfg.seed, 200));

  LiftingModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  std::vector<int> order = data.train_idx;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.raw() % i);
      std::swap(order[i - 1], order[j]);
    }

    bool bad = false;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(at),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
      LossValues lv;
      try {
        lv = compute_loss(model, data, batch, cfg.weights, &grads);
      } catch (const Error&) {
        bad = true;
        break;
      }
      if (!std::isfinite(lv.total)) {
        bad = true;
        break;
      }
      adam.update(model, grads, cfg);
    }
    if (bad) {
      result.diverged = true;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = total_loss(model, data, data.train_idx, cfg.weights);
    rec.val = total_loss(model, data, data.val_idx, cfg.weights);
    result.history.push_back(rec);
    if (!std::isfinite(rec.train.total) || !std::isfinite(rec.val.total)) {
      result.diverged = true;
      break;
    }
    if (rec.val.total < best_val) {
      best_val = rec.val.total;
      best = model;
      best_epoch = epoch;
    }
  }

  result.model = std::move(best);
  result.best_epoch = best_epoch;
  return result;
}

}  // namespace econdeepc
