#include "econdeepc/losses.hpp"

#include <cmath>
#include <string>

#include "econdeepc/error.hpp"
#include "econdeepc/hankel.hpp"

namespace econdeepc {

void LossWeights::validate() const {
  if (econ < 0 || recon < 0 || linear < 0)
    fail(ErrorKind::invalid_argument, "loss weights must be >= 0");
  if (econ == 0 && recon == 0 && linear == 0)
    fail(ErrorKind::invalid_argument, "loss weights must not all be zero");
}

namespace {

Eigen::VectorXd stack_rows(const Eigen::MatrixXd& rows) {
  Eigen::VectorXd v(rows.size());
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    v.segment(i * rows.cols(), rows.cols()) = rows.row(i).transpose();
  return v;
}

}  // namespace

TrainingData prepare_training_data(const Dataset& ds, const std::vector<int>& yc_idx,
                                   const Eigen::VectorXd& u_scale) {
  ds.validate();
  const Eigen::Index T = ds.hankel_traj.length();
  const Eigen::Index L = ds.meta.L;
  const Eigen::Index n_u = ds.hankel_traj.n_u();
  const Eigen::Index n_y = ds.hankel_traj.n_y();
  if (u_scale.size() != n_u)
    fail(ErrorKind::invalid_argument, "prepare_training_data: u_scale size mismatch");
  for (int ch : yc_idx)
    if (ch < 0 || ch >= n_y)
      fail(ErrorKind::invalid_argument, "prepare_training_data: yc channel out of range");

  TrainingData d;
  d.L = L;
  d.yc_idx = yc_idx;
  d.u_scale = u_scale;
  for (std::size_t w = 0; w < ds.windows.size(); ++w) {
    if (ds.tags[w] == SplitTag::train) d.train_idx.push_back(static_cast<int>(w));
    else if (ds.tags[w] == SplitTag::val) d.val_idx.push_back(static_cast<int>(w));
    else if (ds.tags[w] == SplitTag::test) d.test_idx.push_back(static_cast<int>(w));
  }

  // Standardization statistics over the fit targets: Hankel trajectory plus
  // training-split windows.
  Eigen::Index n_rows = T;
  for (int w : d.train_idx) n_rows += ds.windows[static_cast<std::size_t>(w)].length();
  Eigen::MatrixXd Yfit(n_rows, n_y);
  Eigen::VectorXd cfit(n_rows);
  Yfit.topRows(T) = ds.hankel_traj.outputs;
  cfit.head(T) = ds.hankel_traj.costs;
  Eigen::Index at = T;
  for (int w : d.train_idx) {
    const auto& t = ds.windows[static_cast<std::size_t>(w)];
    Yfit.middleRows(at, t.length()) = t.outputs;
    cfit.segment(at, t.length()) = t.costs;
    at += t.length();
  }
  d.y_mean = Yfit.colwise().mean();
  Eigen::VectorXd var =
      (Yfit.rowwise() - d.y_mean.transpose()).array().square().colwise().mean();
  d.y_std = var.array().sqrt();
  for (Eigen::Index i = 0; i < d.y_std.size(); ++i)
    if (!(d.y_std(i) > 1e-12)) d.y_std(i) = 1.0;
  d.c_mean = cfit.mean();
  d.c_std = std::sqrt((cfit.array() - d.c_mean).square().mean());
  if (!(d.c_std > 1e-12)) d.c_std = 1.0;

  auto norm_yc = [&](const Eigen::MatrixXd& Y) {
    Eigen::MatrixXd out(Y.rows(), static_cast<Eigen::Index>(yc_idx.size()));
    for (std::size_t j = 0; j < yc_idx.size(); ++j) {
      const int ch = yc_idx[j];
      out.col(static_cast<Eigen::Index>(j)) =
          (Y.col(ch).array() - d.y_mean(ch)) / d.y_std(ch);
    }
    return out;
  };

  d.Y_T = ds.hankel_traj.outputs;
  d.cN_T = (ds.hankel_traj.costs.array() - d.c_mean) / d.c_std;
  d.YcN_T = norm_yc(ds.hankel_traj.outputs);

  d.windows.reserve(ds.windows.size());
  for (const auto& t : ds.windows) {
    TrainingData::Window w;
    w.Y = t.outputs;
    w.cN = (t.costs.array() - d.c_mean) / d.c_std;
    w.YcN = norm_yc(t.outputs);
    d.windows.push_back(std::move(w));
  }

  // Lemma coefficients are lifting-independent: g_w = H_L(u_T)^+ u_L with
  // per-channel input scaling applied on both sides.
  Eigen::MatrixXd Us = ds.hankel_traj.inputs.array().rowwise() /
                       u_scale.transpose().array();
  const Eigen::MatrixXd Hu = build_hankel(Us, L).data;
  const Eigen::MatrixXd Hu_pinv = pseudo_inverse(Hu);
  d.g_all.resize(T - L + 1, static_cast<Eigen::Index>(ds.windows.size()));
  for (std::size_t w = 0; w < ds.windows.size(); ++w) {
    Eigen::MatrixXd uw = ds.windows[w].inputs.array().rowwise() /
                         u_scale.transpose().array();
    d.g_all.col(static_cast<Eigen::Index>(w)).noalias() = Hu_pinv * stack_rows(uw);
  }
  return d;
}

LossValues compute_loss(const LiftingModel& model, const TrainingData& data,
                        const std::vector<int>& window_indices, const LossWeights& weights,
                        ModelGrads* grads) {
  weights.validate();
  const Eigen::Index B = static_cast<Eigen::Index>(window_indices.size());
  if (B == 0) fail(ErrorKind::invalid_argument, "compute_loss: empty window batch");
  const Eigen::Index T = data.T();
  const Eigen::Index L = data.L;
  const Eigen::Index n_y = model.n_y();
  const Eigen::Index n_z = model.n_z();
  const Eigen::Index n_c = data.n_c();
  if (model.G.rows() != n_c)
    fail(ErrorKind::invalid_argument, "compute_loss: model n_c disagrees with data");

  // Stack the Hankel trajectory and the batch windows into one forward pass.
  Eigen::MatrixXd Y(T + B * L, n_y);
  Y.topRows(T) = data.Y_T;
  Eigen::VectorXd c_target(T + B * L);
  c_target.head(T) = data.cN_T;
  Eigen::MatrixXd yc_target(T + B * L, n_c);
  yc_target.topRows(T) = data.YcN_T;
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& w = data.windows[static_cast<std::size_t>(window_indices[static_cast<std::size_t>(b)])];
    Y.middleRows(T + b * L, L) = w.Y;
    c_target.segment(T + b * L, L) = w.cN;
    yc_target.middleRows(T + b * L, L) = w.YcN;
  }

  Mlp::Trace trace;
  const Eigen::MatrixXd Yn = model.normalize_y(Y);
  const Eigen::MatrixXd Z =
      grads != nullptr ? model.net.forward(Yn, trace) : model.net.forward(Yn);
  if (!Z.allFinite())
    fail(ErrorKind::numeric, "compute_loss: non-finite lifted output");

  // Per-row weights: the shared T-part counts once per item, window rows are
  // averaged over the batch.
  Eigen::VectorXd row_w(T + B * L);
  row_w.head(T).setConstant(1.0 / static_cast<double>(T + L));
  row_w.tail(B * L).setConstant(1.0 / static_cast<double>(B * (T + L)));

  LossValues out;

  // Economic-cost surrogate term.
  const Eigen::VectorXd curv = model.head.curvature();
  const Eigen::VectorXd c_hat = approx_cost(model.head, Z);
  const Eigen::VectorXd r_c = c_hat - c_target;
  out.econ = (row_w.array() * r_c.array().square()).sum();

  // Reconstruction term.
  Eigen::MatrixXd r_rec = Z * model.G.transpose() - yc_target;
  out.recon = (row_w.array() * r_rec.rowwise().squaredNorm().array()).sum() /
              static_cast<double>(n_c);

  // Lemma-conformance term.
  const Eigen::Index n_cols = data.g_all.rows();
  Eigen::MatrixXd H(n_z * L, n_cols);
  {
    const Eigen::MatrixXd Z_T = Z.topRows(T);
    for (Eigen::Index i = 0; i < L; ++i)
      H.middleRows(i * n_z, n_z) = Z_T.middleRows(i, n_cols).transpose();
  }
  Eigen::MatrixXd G_batch(n_cols, B);
  Eigen::MatrixXd ZL(n_z * L, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    G_batch.col(b) = data.g_all.col(window_indices[static_cast<std::size_t>(b)]);
    for (Eigen::Index i = 0; i < L; ++i)
      ZL.col(b).segment(i * n_z, n_z) = Z.row(T + b * L + i).transpose();
  }
  Eigen::MatrixXd r_lin = ZL - H * G_batch;
  out.linear = r_lin.squaredNorm() / static_cast<double>(B * n_z * L);

  out.total = weights.econ * out.econ + weights.recon * out.recon + weights.linear * out.linear;

  if (grads == nullptr) return out;

  grads->setZero();
  Eigen::MatrixXd dZ = Eigen::MatrixXd::Zero(T + B * L, n_z);

  // d(total)/d(c_hat), then through the quadratic head.
  {
    const Eigen::VectorXd dc = 2.0 * weights.econ * (row_w.array() * r_c.array()).matrix();
    dZ.noalias() += dc.asDiagonal() * (2.0 * (Z * curv.asDiagonal()));
    dZ.noalias() += dc * model.head.P;
    // dcurv_j/dq_j = curv_j for both sign modes.
    grads->q += (Z.array().square().matrix().transpose() * dc).cwiseProduct(curv);
    grads->P += dc.transpose() * Z;
    grads->b += dc.sum();
  }

  // Reconstruction term.
  {
    Eigen::MatrixXd dYc =
        (2.0 * weights.recon / static_cast<double>(n_c)) * (row_w.asDiagonal() * r_rec);
    dZ.noalias() += dYc * model.G;
    grads->G.noalias() += dYc.transpose() * Z;
  }

  // Lemma term: window rows get the residual directly, the Hankel trajectory
  // rows collect every column they appear in.
  {
    const double scale = 2.0 * weights.linear / static_cast<double>(B * n_z * L);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index i = 0; i < L; ++i)
        dZ.row(T + b * L + i) += scale * r_lin.col(b).segment(i * n_z, n_z).transpose();
    Eigen::MatrixXd dH = (-scale) * (r_lin * G_batch.transpose());
    for (Eigen::Index i = 0; i < L; ++i)
      dZ.block(i, 0, n_cols, n_z) += dH.middleRows(i * n_z, n_z).transpose();
  }

  model.net.backward(trace, dZ, grads->net);
  return out;
}

double loss_econ(const CostHead& head, const Eigen::MatrixXd& z_rows,
                 const Eigen::VectorXd& c_targets) {
  if (z_rows.rows() == 0) fail(ErrorKind::invalid_argument, "loss_econ: empty batch");
  if (z_rows.rows() != c_targets.size())
    fail(ErrorKind::invalid_argument, "loss_econ: batch size mismatch");
  return (approx_cost(head, z_rows) - c_targets).squaredNorm() /
         static_cast<double>(c_targets.size());
}

double loss_recon(const Eigen::MatrixXd& G, const Eigen::MatrixXd& z_rows,
                  const Eigen::MatrixXd& yc_rows) {
  if (z_rows.rows() == 0) fail(ErrorKind::invalid_argument, "loss_recon: empty batch");
  if (z_rows.rows() != yc_rows.rows() || G.rows() != yc_rows.cols() || G.cols() != z_rows.cols())
    fail(ErrorKind::invalid_argument, "loss_recon: shape mismatch");
  return (z_rows * G.transpose() - yc_rows).squaredNorm() /
         static_cast<double>(yc_rows.size());
}

double loss_linear(const LiftingModel& model, const Trajectory& hankel_traj,
                   const Trajectory& window, const Eigen::VectorXd& u_scale) {
  const Eigen::Index L = window.length();
  if (hankel_traj.length() < L)
    fail(ErrorKind::invalid_argument, "loss_linear: hankel trajectory shorter than window");
  const Eigen::Index n_z = model.n_z();

  Eigen::MatrixXd Us = hankel_traj.inputs.array().rowwise() / u_scale.transpose().array();
  Eigen::MatrixXd uw = window.inputs.array().rowwise() / u_scale.transpose().array();
  const Eigen::VectorXd g =
      pseudo_inverse(build_hankel(Us, L).data) * stack_rows(uw);

  const Eigen::MatrixXd Z_T = model.lift(hankel_traj.outputs);
  const Eigen::MatrixXd Z_L = model.lift(window.outputs);
  const Eigen::VectorXd pred = build_hankel(Z_T, L).data * g;
  return (stack_rows(Z_L) - pred).squaredNorm() / static_cast<double>(n_z * L);
}

LossValues total_loss(const LiftingModel& model, const TrainingData& data,
                      const std::vector<int>& window_indices, const LossWeights& weights) {
  return compute_loss(model, data, window_indices, weights, nullptr);
}

}  // namespace econdeepc
