#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "fovea/constraints.hpp"
#include "fovea/kinematics.hpp"
#include "fovea/qp.hpp"
#include "fovea/quaternion.hpp"

namespace fovea {

struct TaskGains {
  double eta_q{3.0};
  double alpha{0.99};
  double beta{0.999};
  double lambda{0.01};

  void validate() const {
    if (!(eta_q > 0.0)) throw std::invalid_argument("TaskGains: eta_q <= 0");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("TaskGains: alpha");
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("TaskGains: beta");
    if (!(lambda > 0.0)) {
      throw std::invalid_argument("TaskGains: lambda must be > 0 (strict convexity)");
    }
  }
};

struct TaskTargets {
  Quaternion r1_d{1.0, 0.0, 0.0, 0.0};
  Quaternion t1_d{};  // pure
  Quaternion t2_d{};  // pure; neutral camera position preference
};

// Double-cover-aware rotation error: r-hat* r_d -+ 1, whichever branch has
// the smaller norm; ties resolve to the minus branch.
inline Quaternion switching_rotation_error(const Quaternion& r_hat,
                                           const Quaternion& r_d) {
  const Quaternion prod = r_hat.conj() * r_d;
  const Quaternion one{1.0, 0.0, 0.0, 0.0};
  const Quaternion e_minus = prod - one;
  const Quaternion e_plus = prod + one;
  return e_minus.norm() <= e_plus.norm() ? e_minus : e_plus;
}

// Weighted pose-tracking errors for one tick.
struct TaskErrors {
  Quaternion t1_tilde;  // t-hat_1 - t_{1,d}
  Quaternion r1_tilde;  // switching error of R1
  Quaternion t2_tilde;  // t-hat_2 - t_{2,d}
};

inline TaskErrors task_errors(const KinematicState& s1, const KinematicState& s2,
                              const TaskTargets& targets) {
  return {s1.translation - targets.t1_d,
          switching_rotation_error(s1.rotation, targets.r1_d),
          s2.translation - targets.t2_d};
}

// Derivative of the switching error r-hat* r_d -+ 1 as a function of
// vec4(r-hat-dot); the branch constant drops out. The map is orthogonal, so
// J_err' J_err = Jr' Jr.
inline Matrix4x8 rotation_error_jacobian(const Quaternion& r_d,
                                         const Matrix4x8& jr_q) {
  return hamilton_minus4(r_d) * conjugation_map4() * jr_q;
}

// Expands the quadratic costs of the two-robot tracking law over the stacked
// q-dot in R^16: R1 carries weight beta (translation alpha, rotation 1-alpha),
// R2 carries 1-beta with a translation preference only.
inline QpProblem assemble_task_qp(const KinematicState& s1,
                                  const KinematicState& s2,
                                  const TaskTargets& targets,
                                  const TaskGains& gains,
                                  const ConstraintSet& constraints) {
  gains.validate();
  if (constraints.dim != 16) {
    throw std::invalid_argument("assemble_task_qp: constraints must be over R^16");
  }
  const TaskErrors err = task_errors(s1, s2, targets);
  const Matrix4x8 jr1_err = rotation_error_jacobian(targets.r1_d, s1.Jr_q);

  QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(16, 16);
  qp.f = Eigen::VectorXd::Zero(16);

  const double w_t1 = gains.beta * gains.alpha;
  const double w_r1 = gains.beta * (1.0 - gains.alpha);
  const double w_t2 = 1.0 - gains.beta;
  const double lam2 = gains.lambda * gains.lambda;

  qp.H.topLeftCorner(8, 8) =
      2.0 * (w_t1 * s1.Jt_q.transpose() * s1.Jt_q +
             w_r1 * jr1_err.transpose() * jr1_err +
             gains.beta * lam2 * Eigen::MatrixXd::Identity(8, 8));
  qp.H.bottomRightCorner(8, 8) =
      2.0 * (w_t2 * s2.Jt_q.transpose() * s2.Jt_q +
             w_t2 * lam2 * Eigen::MatrixXd::Identity(8, 8));

  qp.f.head(8) = 2.0 * gains.eta_q *
                 (w_t1 * s1.Jt_q.transpose() * vec4(err.t1_tilde) +
                  w_r1 * jr1_err.transpose() * vec4(err.r1_tilde));
  qp.f.tail(8) = 2.0 * gains.eta_q * w_t2 * s2.Jt_q.transpose() * vec4(err.t2_tilde);

  qp.A = constraints.matrix();
  qp.b = constraints.bounds();
  return qp;
}

struct ControlTickResult {
  Vector16 u{Vector16::Zero()};
  QpStatus status{QpStatus::optimal};
  bool feasible{true};
};

// One controller step; infeasible ticks command zero velocity and are flagged.
inline ControlTickResult control_tick(const KinematicState& s1,
                                      const KinematicState& s2,
                                      const TaskTargets& targets,
                                      const TaskGains& gains,
                                      const ConstraintSet& constraints,
                                      const QpOptions& opts = {}) {
  const QpProblem qp = assemble_task_qp(s1, s2, targets, gains, constraints);
  const QpSolution sol = solve(qp, opts);
  ControlTickResult out;
  out.status = sol.status;
  if (sol.status == QpStatus::optimal) {
    out.u = sol.u;
  } else {
    out.feasible = false;
    out.u.setZero();
  }
  return out;
}

}  // namespace fovea
