#pragma once

#include <Eigen/Dense>

namespace wigprobe {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0.
/// Columns are scaled to unit norm internally; the passive-set subproblems
/// use column-pivoted QR. Throws NumericalError if the iteration limit
/// (default 3 * columns) is hit.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter = -1);

/// NNLS with the extra constraint sum(x) <= 1. When the unconstrained
/// solution overshoots, the sum is pinned to 1 by a heavily weighted row.
NnlsResult nnls_capped(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter = -1);

/// Euclidean projection onto the probability simplex {x >= 0, sum x = 1}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace wigprobe
