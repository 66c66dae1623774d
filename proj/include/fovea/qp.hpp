#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace fovea {

// min 1/2 u'Hu + f'u  s.t.  A u <= b,  C u = d.  H must be symmetric PD.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;

  int vars() const { return static_cast<int>(H.rows()); }

  void validate() const {
    const int n = vars();
    if (H.cols() != n || f.size() != n) {
      throw std::invalid_argument("QpProblem: H/f dimension mismatch");
    }
    const double hscale = 1.0 + H.cwiseAbs().maxCoeff();
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * hscale) {
      throw std::invalid_argument("QpProblem: H is not symmetric");
    }
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n)) {
      throw std::invalid_argument("QpProblem: A/b dimension mismatch");
    }
    if (C.rows() != d.size() || (C.rows() > 0 && C.cols() != n)) {
      throw std::invalid_argument("QpProblem: C/d dimension mismatch");
    }
  }
};

enum class QpStatus { optimal, infeasible, max_iterations };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    default: return "max-iter";
  }
}

struct QpSolution {
  Eigen::VectorXd u;
  QpStatus status{QpStatus::optimal};
  double kkt_residual{0.0};
  Eigen::VectorXd ineq_multipliers;
  Eigen::VectorXd eq_multipliers;
  int iterations{0};
};

struct QpOptions {
  double feasibility_tol{1e-9};
  double dependence_tol{1e-11};
  int max_iterations{0};            // 0 = automatic
  Eigen::VectorXd warm_start;       // hint: previous tick's solution
};

namespace detail {

struct GiState {
  Eigen::MatrixXd j_mat;  // L^-T rotated by the active-set orthogonal factor
  Eigen::MatrixXd r_mat;  // triangular factor of the active normals
  std::vector<int> active_row;      // row index into A (>= 0) or C (< 0: ~row)
  std::vector<double> active_sign;  // +-1 normal flip (equalities only)
  std::vector<double> multipliers;
  Eigen::VectorXd x;
  int n{0};

  int active_count() const { return static_cast<int>(active_row.size()); }
  bool is_equality(int k) const { return active_row[k] < 0; }
};

inline void apply_givens_cols(Eigen::MatrixXd& m, int c1, int c2, double cc,
                              double ss) {
  for (int i = 0; i < m.rows(); ++i) {
    const double t1 = m(i, c1);
    const double t2 = m(i, c2);
    m(i, c1) = cc * t1 + ss * t2;
    m(i, c2) = -ss * t1 + cc * t2;
  }
}

// Appends a constraint whose transformed normal is `dvec`; rotates the tail
// of dvec to zero and stores the new column of R.
inline void gi_add_to_basis(GiState& st, Eigen::VectorXd& dvec) {
  const int q = st.active_count();
  for (int j = st.n - 1; j >= q + 1; --j) {
    const double a = dvec(j - 1);
    const double bb = dvec(j);
    const double h = std::hypot(a, bb);
    if (h == 0.0) continue;
    const double cc = a / h;
    const double ss = bb / h;
    dvec(j - 1) = h;
    dvec(j) = 0.0;
    apply_givens_cols(st.j_mat, j - 1, j, cc, ss);
  }
  st.r_mat.col(q).head(q + 1) = dvec.head(q + 1);
}

// Removes active constraint at position l and re-triangularizes R.
inline void gi_drop_from_basis(GiState& st, int l) {
  int q = st.active_count();
  st.active_row.erase(st.active_row.begin() + l);
  st.active_sign.erase(st.active_sign.begin() + l);
  st.multipliers.erase(st.multipliers.begin() + l);
  for (int c = l; c < q - 1; ++c) st.r_mat.col(c) = st.r_mat.col(c + 1);
  st.r_mat.col(q - 1).setZero();
  q -= 1;
  for (int j = l; j < q; ++j) {
    const double a = st.r_mat(j, j);
    const double bb = st.r_mat(j + 1, j);
    const double h = std::hypot(a, bb);
    if (h == 0.0) continue;
    const double cc = a / h;
    const double ss = bb / h;
    for (int c = j; c < q; ++c) {
      const double t1 = st.r_mat(j, c);
      const double t2 = st.r_mat(j + 1, c);
      st.r_mat(j, c) = cc * t1 + ss * t2;
      st.r_mat(j + 1, c) = -ss * t1 + cc * t2;
    }
    apply_givens_cols(st.j_mat, j, j + 1, cc, ss);
  }
}

enum class AddResult { added, satisfied, infeasible, iteration_cap };

// Goldfarb-Idnani step: drive constraint  normal'x >= rhs  into the active
// set, dropping blocking constraints as their multipliers hit zero.
inline AddResult gi_add_constraint(GiState& st, const Eigen::VectorXd& normal,
                                   double rhs, int row_code, double sign,
                                   bool equality, double dep_tol, int& iterations,
                                   int iteration_cap) {
  double u_new = 0.0;
  while (true) {
    if (++iterations > iteration_cap) return AddResult::iteration_cap;
    const int q = st.active_count();
    Eigen::VectorXd dvec = st.j_mat.transpose() * normal;
    const Eigen::VectorXd z = st.j_mat.rightCols(st.n - q) * dvec.tail(st.n - q);
    Eigen::VectorXd r;
    if (q > 0) {
      r = st.r_mat.topLeftCorner(q, q)
              .triangularView<Eigen::Upper>()
              .solve(dvec.head(q));
    }
    const double slack = normal.dot(st.x) - rhs;
    const double dep_scale = 1.0 + normal.cwiseAbs().maxCoeff();

    // blocking dual step (inequalities only)
    double t1 = std::numeric_limits<double>::infinity();
    int drop = -1;
    for (int k = 0; k < q; ++k) {
      if (st.is_equality(k)) continue;
      if (r(k) > 1e-13) {
        const double cand = st.multipliers[k] / r(k);
        if (cand < t1) {
          t1 = cand;
          drop = k;
        }
      }
    }
    const double z_norm = z.cwiseAbs().maxCoeff();
    const bool dependent = z_norm <= dep_tol * dep_scale;
    const double t2 = dependent
                          ? std::numeric_limits<double>::infinity()
                          : -slack / dvec.tail(st.n - q).squaredNorm();

    if (dependent && equality) {
      // consistent duplicates are dropped, contradictions are infeasible
      if (std::abs(slack) <= 1e-9 * (1.0 + std::abs(rhs))) {
        return AddResult::satisfied;
      }
      return AddResult::infeasible;
    }
    const double t = std::min(t1, t2);
    if (!std::isfinite(t)) return AddResult::infeasible;

    if (!dependent) st.x += t * z;
    for (int k = 0; k < q; ++k) st.multipliers[k] -= t * r(k);
    u_new += t;

    if (t == t2 && !dependent) {
      gi_add_to_basis(st, dvec);
      st.active_row.push_back(row_code);
      st.active_sign.push_back(sign);
      st.multipliers.push_back(u_new);
      return AddResult::added;
    }
    gi_drop_from_basis(st, drop);
  }
}

}  // namespace detail

inline QpSolution solve(const QpProblem& qp, const QpOptions& opts = {}) {
  qp.validate();
  const int n = qp.vars();
  const int m = static_cast<int>(qp.A.rows());
  const int p = static_cast<int>(qp.C.rows());

  Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("qp::solve: H is not positive definite");
  }

  detail::GiState st;
  st.n = n;
  st.x = llt.solve(-qp.f);
  st.j_mat = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  st.r_mat = Eigen::MatrixXd::Zero(n, n);

  QpSolution sol;
  sol.ineq_multipliers = Eigen::VectorXd::Zero(m);
  sol.eq_multipliers = Eigen::VectorXd::Zero(p);

  const int cap = opts.max_iterations > 0 ? opts.max_iterations
                                          : 100 + 20 * (n + m + p);
  const double bscale =
      1.0 + (m > 0 ? qp.b.cwiseAbs().maxCoeff() : 0.0);
  const double feas_tol = opts.feasibility_tol * bscale;

  // equalities first; they are never dropped
  for (int j = 0; j < p; ++j) {
    const double s = qp.C.row(j).dot(st.x) - qp.d(j);
    const double sign = s > 0.0 ? -1.0 : 1.0;
    const auto res = detail::gi_add_constraint(
        st, sign * qp.C.row(j).transpose(), sign * qp.d(j), ~j, sign, true,
        opts.dependence_tol, sol.iterations, cap);
    if (res == detail::AddResult::infeasible) {
      sol.status = QpStatus::infeasible;
      sol.u = Eigen::VectorXd::Zero(n);
      return sol;
    }
    if (res == detail::AddResult::iteration_cap) {
      sol.status = QpStatus::max_iterations;
      sol.u = st.x;
      return sol;
    }
  }

  const bool has_hint = opts.warm_start.size() == n;
  Eigen::VectorXd hint_slack;
  if (has_hint && m > 0) hint_slack = qp.b - qp.A * opts.warm_start;

  while (true) {
    if (sol.iterations > cap) {
      sol.status = QpStatus::max_iterations;
      break;
    }
    int pick = -1;
    double pick_violation = 0.0;
    bool pick_hint_tight = false;
    if (m > 0) {
      const Eigen::VectorXd slack = qp.b - qp.A * st.x;
      for (int i = 0; i < m; ++i) {
        const double violation = -slack(i);
        if (violation <= feas_tol) continue;
        const bool tight =
            has_hint && std::abs(hint_slack(i)) <= 1e-7 * bscale;
        // prefer constraints active at the warm-start hint, then the most
        // violated; deterministic tie-break by index
        bool better = false;
        if (pick < 0) {
          better = true;
        } else if (tight != pick_hint_tight) {
          better = tight;
        } else {
          better = violation > pick_violation;
        }
        if (better) {
          pick = i;
          pick_violation = violation;
          pick_hint_tight = tight;
        }
      }
    }
    if (pick < 0) {
      sol.status = QpStatus::optimal;
      break;
    }
    const auto res = detail::gi_add_constraint(
        st, -qp.A.row(pick).transpose(), -qp.b(pick), pick, 1.0, false,
        opts.dependence_tol, sol.iterations, cap);
    if (res == detail::AddResult::infeasible) {
      sol.status = QpStatus::infeasible;
      sol.u = Eigen::VectorXd::Zero(n);
      return sol;
    }
    if (res == detail::AddResult::iteration_cap) {
      sol.status = QpStatus::max_iterations;
      break;
    }
  }

  sol.u = st.x;
  for (int k = 0; k < st.active_count(); ++k) {
    if (st.is_equality(k)) {
      sol.eq_multipliers(~st.active_row[k]) = -st.active_sign[k] * st.multipliers[k];
    } else {
      sol.ineq_multipliers(st.active_row[k]) = st.multipliers[k];
    }
  }

  Eigen::VectorXd grad = qp.H * st.x + qp.f;
  if (m > 0) grad += qp.A.transpose() * sol.ineq_multipliers;
  if (p > 0) grad += qp.C.transpose() * sol.eq_multipliers;
  double residual = grad.cwiseAbs().maxCoeff();
  if (m > 0) {
    const Eigen::VectorXd viol = qp.A * st.x - qp.b;
    residual = std::max(residual, viol.maxCoeff());
    residual = std::max(
        residual, (sol.ineq_multipliers.array() * viol.array()).abs().maxCoeff());
  }
  if (p > 0) {
    residual = std::max(residual, (qp.C * st.x - qp.d).cwiseAbs().maxCoeff());
  }
  sol.kkt_residual = residual;
  return sol;
}

}  // namespace fovea
