#pragma once

#include <Eigen/Dense>

namespace fovea {

// Central-difference Jacobian of f: R^n -> R^m at x0.
template <typename F>
Eigen::MatrixXd central_difference_jacobian(F&& f, const Eigen::VectorXd& x0,
                                            double eps) {
  Eigen::VectorXd xp = x0;
  Eigen::VectorXd xm = x0;
  Eigen::MatrixXd jac;
  for (int c = 0; c < x0.size(); ++c) {
    xp(c) = x0(c) + eps;
    xm(c) = x0(c) - eps;
    const Eigen::VectorXd fp = f(xp);
    const Eigen::VectorXd fm = f(xm);
    if (c == 0) jac.resize(fp.size(), x0.size());
    jac.col(c) = (fp - fm) / (2.0 * eps);
    xp(c) = x0(c);
    xm(c) = x0(c);
  }
  return jac;
}

// max |a - b| / (1 + |a|), entrywise.
inline double max_relative_error(const Eigen::MatrixXd& analytic,
                                 const Eigen::MatrixXd& fd) {
  double worst = 0.0;
  for (int i = 0; i < analytic.rows(); ++i) {
    for (int j = 0; j < analytic.cols(); ++j) {
      const double err =
          std::abs(analytic(i, j) - fd(i, j)) / (1.0 + std::abs(analytic(i, j)));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace fovea
