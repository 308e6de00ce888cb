#include "econdeepc/hankel.hpp"

#include <string>

#include <Eigen/SVD>

#include "econdeepc/error.hpp"

namespace econdeepc {

namespace {

double rank_threshold(const Eigen::MatrixXd& M, const Eigen::VectorXd& sv) {
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  return static_cast<double>(std::max(M.rows(), M.cols())) * sigma_max * 1e-12;
}

}  // namespace

HankelMatrix build_hankel(const Eigen::MatrixXd& seq, Eigen::Index depth) {
  const Eigen::Index T = seq.rows();
  const Eigen::Index m = seq.cols();
  if (depth < 1) fail(ErrorKind::invalid_argument, "hankel depth must be >= 1");
  if (m < 1) fail(ErrorKind::invalid_argument, "hankel sequence has no channels");
  if (T < depth)
    fail(ErrorKind::invalid_argument,
         "sequence length " + std::to_string(T) + " shorter than hankel depth " +
             std::to_string(depth));

  const Eigen::Index cols = T - depth + 1;
  HankelMatrix H;
  H.block_dim = m;
  H.depth = depth;
  H.data.resize(m * depth, cols);
  for (Eigen::Index i = 0; i < depth; ++i)
    H.data.middleRows(i * m, m) = seq.middleRows(i, cols).transpose();
  return H;
}

HankelMatrix build_hankel(const std::vector<Eigen::VectorXd>& seq, Eigen::Index depth) {
  if (seq.empty()) fail(ErrorKind::invalid_argument, "hankel sequence is empty");
  const Eigen::Index m = seq.front().size();
  Eigen::MatrixXd packed(static_cast<Eigen::Index>(seq.size()), m);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    if (seq[k].size() != m)
      fail(ErrorKind::invalid_argument,
           "hankel sequence has inhomogeneous vector sizes (step " + std::to_string(k) +
               " has " + std::to_string(seq[k].size()) + ", expected " + std::to_string(m) + ")");
    packed.row(static_cast<Eigen::Index>(k)) = seq[k].transpose();
  }
  return build_hankel(packed, depth);
}

HankelBlocks partition_hankel(const HankelMatrix& H_u, const HankelMatrix& H_z,
                              Eigen::Index T_ini, Eigen::Index N_p) {
  if (T_ini < 1 || N_p < 1)
    fail(ErrorKind::invalid_argument, "partition requires T_ini >= 1 and N_p >= 1");
  const Eigen::Index L = T_ini + N_p;
  if (H_u.depth != L || H_z.depth != L)
    fail(ErrorKind::invalid_argument,
         "hankel depth mismatch: expected " + std::to_string(L) + ", got " +
             std::to_string(H_u.depth) + " / " + std::to_string(H_z.depth));
  if (H_u.cols() != H_z.cols())
    fail(ErrorKind::invalid_argument, "hankel column counts disagree");

  HankelBlocks b;
  b.n_u = H_u.block_dim;
  b.n_z = H_z.block_dim;
  b.T_ini = T_ini;
  b.N_p = N_p;
  b.U_p = H_u.data.topRows(b.n_u * T_ini);
  b.U_f = H_u.data.bottomRows(b.n_u * N_p);
  b.Z_p = H_z.data.topRows(b.n_z * T_ini);
  b.Z_f = H_z.data.bottomRows(b.n_z * N_p);
  return b;
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = rank_threshold(M, sv);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++r;
  return r;
}

PeResult is_persistently_exciting(const Eigen::MatrixXd& seq, Eigen::Index order) {
  const HankelMatrix H = build_hankel(seq, order);
  PeResult r;
  r.required_rank = H.data.rows();
  r.achieved_rank = numerical_rank(H.data);
  r.exciting = r.achieved_rank == r.required_rank;
  return r;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return M.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = rank_threshold(M, sv);
  Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) inv_sv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

ReducedHankel reduce_hankel(const Eigen::MatrixXd& stacked, const RetentionSpec& retention) {
  if (stacked.size() == 0) fail(ErrorKind::invalid_argument, "reduce_hankel: empty matrix");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();

  double tol;
  if (retention.rel_tol >= 0.0)
    tol = retention.rel_tol * (sv.size() > 0 ? sv(0) : 0.0);
  else
    tol = rank_threshold(stacked, sv);

  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;

  Eigen::Index n_r = retention.rank > 0 ? retention.rank : rank;
  if (n_r > rank)
    fail(ErrorKind::invalid_argument,
         "requested rank " + std::to_string(n_r) + " exceeds achievable rank " +
             std::to_string(rank));
  if (n_r < 1) fail(ErrorKind::numeric, "reduce_hankel: matrix is numerically zero");

  ReducedHankel r;
  r.n_r = n_r;
  r.singular_values = sv;
  r.matrix = svd.matrixU().leftCols(n_r) * sv.head(n_r).asDiagonal();
  r.right_factor = svd.matrixV().leftCols(n_r);
  return r;
}

}  // namespace econdeepc
