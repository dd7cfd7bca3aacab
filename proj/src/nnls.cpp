#include "wigprobe/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "wigprobe/errors.hpp"

namespace wigprobe {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const std::vector<char>& passive) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (passive[j]) idx.push_back(j);
  }
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) sub.col(k) = a.col(idx[k]);
  const Eigen::VectorXd z = sub.colPivHouseholderQr().solve(b);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) s[idx[k]] = z[k];
  return s;
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& a_in, const Eigen::VectorXd& b, int max_iter) {
  const Eigen::Index m = a_in.rows();
  const Eigen::Index n = a_in.cols();
  if (b.size() != m) throw NumericalError("nnls: right-hand side length does not match the matrix");
  if (max_iter < 0) max_iter = 3 * static_cast<int>(n) + 10;

  Eigen::VectorXd scale = a_in.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (scale[j] == 0.0) scale[j] = 1.0;
  }
  const Eigen::MatrixXd a = a_in * scale.cwiseInverse().asDiagonal();

  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m, n)) *
                     std::max(1.0, b.norm());
  std::vector<char> passive(n, 0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w = a.transpose() * b;

  NnlsResult res;
  while (true) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w[j] > best) {
        best = w[j];
        t = j;
      }
    }
    if (t < 0) break;
    if (++res.iterations > max_iter) throw NumericalError("nnls did not converge within the iteration limit");
    passive[t] = 1;

    Eigen::VectorXd s = solve_passive(a, b, passive);
    if (s[t] <= 0.0) {
      // Degenerate step: the new column cannot enter with a positive weight.
      passive[t] = 0;
      w[t] = 0.0;
      continue;
    }
    for (int inner = 0; inner <= n; ++inner) {
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && s[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - s[j]));
      }
      if (!std::isfinite(alpha)) break;
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && x[j] <= tol) {
          passive[j] = 0;
          x[j] = 0.0;
        }
      }
      s = solve_passive(a, b, passive);
    }
    x = s;
    w = a.transpose() * (b - a * x);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[j]) w[j] = 0.0;
    }
  }

  res.residual_norm = (b - a * x).norm();
  res.x = x.cwiseQuotient(scale);
  return res;
}

NnlsResult nnls_capped(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter) {
  NnlsResult res = nnls(a, b, max_iter);
  if (res.x.sum() <= 1.0 + 1e-12) return res;

  const double weight = 10.0 * std::max(1e-300, a.norm());
  Eigen::MatrixXd aug(a.rows() + 1, a.cols());
  aug.topRows(a.rows()) = a;
  aug.row(a.rows()).setConstant(weight);
  Eigen::VectorXd rhs(b.size() + 1);
  rhs.head(b.size()) = b;
  rhs[b.size()] = weight;
  res = nnls(aug, rhs, max_iter);
  const double total = res.x.sum();
  if (total > 1.0) res.x /= total;
  res.residual_norm = (b - a * res.x).norm();
  return res;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw NumericalError("cannot project an empty vector onto the simplex");
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cum += u[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

}  // namespace wigprobe
