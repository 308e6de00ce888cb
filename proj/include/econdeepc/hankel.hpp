#pragma once

#include <vector>

#include <Eigen/Dense>

namespace econdeepc {

// Block Hankel matrix of a vector sequence. Column j stacks the m-vectors
// seq[j], seq[j+1], ..., seq[j+L-1] time-major (all channels of one step,
// then the next step), giving shape (m*L) x (T-L+1).
struct HankelMatrix {
  Eigen::MatrixXd data;
  Eigen::Index block_dim = 0;  // m
  Eigen::Index depth = 0;      // L
  Eigen::Index cols() const { return data.cols(); }
};

// seq has one row per time step (T x m).
HankelMatrix build_hankel(const Eigen::MatrixXd& seq, Eigen::Index depth);

// Convenience overload for a sequence of vectors; rejects inhomogeneous sizes.
HankelMatrix build_hankel(const std::vector<Eigen::VectorXd>& seq, Eigen::Index depth);

// Past/future row split of an input/output Hankel pair of depth T_ini + N_p.
// Stacking [U_p; U_f] reproduces the input Hankel matrix, same for [Z_p; Z_f].
struct HankelBlocks {
  Eigen::MatrixXd U_p, U_f;  // n_u*T_ini and n_u*N_p rows
  Eigen::MatrixXd Z_p, Z_f;  // n_z*T_ini and n_z*N_p rows
  Eigen::Index n_u = 0, n_z = 0, T_ini = 0, N_p = 0;
  Eigen::Index cols() const { return U_p.cols(); }
};

HankelBlocks partition_hankel(const HankelMatrix& H_u, const HankelMatrix& H_z,
                              Eigen::Index T_ini, Eigen::Index N_p);

struct PeResult {
  bool exciting = false;
  Eigen::Index achieved_rank = 0;
  Eigen::Index required_rank = 0;
};

// Persistent excitation of order L: the depth-L Hankel matrix of seq has full
// row rank (numerical rank, see below).
PeResult is_persistently_exciting(const Eigen::MatrixXd& seq, Eigen::Index order);

// Spectral rank criterion: sigma_i counts as nonzero iff
//   sigma_i > max(rows, cols) * sigma_max * 1e-12.
Eigen::Index numerical_rank(const Eigen::MatrixXd& M);

// Moore-Penrose pseudo-inverse via SVD; singular values below the
// numerical_rank threshold are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& M);

// Rank-n_r factor of a (stacked) Hankel matrix: matrix = W_1 * Sigma_1 with
// Sigma_1 the retained singular values, right_factor = V_1, so
// matrix * right_factor^T reconstructs the input to the retention tolerance.
struct ReducedHankel {
  Eigen::MatrixXd matrix;           // rows x n_r
  Eigen::Index n_r = 0;
  Eigen::MatrixXd right_factor;     // cols x n_r
  Eigen::VectorXd singular_values;  // all of them, descending
};

struct RetentionSpec {
  Eigen::Index rank = 0;  // explicit n_r; 0 selects by tolerance
  double rel_tol = -1.0;  // relative to sigma_max; < 0 uses the spectral rank criterion
};

ReducedHankel reduce_hankel(const Eigen::MatrixXd& stacked,
                            const RetentionSpec& retention = {});

}  // namespace econdeepc
