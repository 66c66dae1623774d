#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "fovea/camera.hpp"
#include "fovea/constraints.hpp"
#include "fovea/kinematics.hpp"
#include "fovea/qp.hpp"
#include "fovea/task_controller.hpp"

namespace fovea {

using Matrix4x88 = Eigen::Matrix<double, 4, 88>;
using Matrix5x88 = Eigen::Matrix<double, 5, 88>;

// True for parameters measured in radians (Euler angles, theta_offset, alpha).
inline bool is_angular_parameter(int c) {
  if (c >= 3 && c < 6) return true;
  if (c >= 6 && c < 38) {
    const int k = (c - 6) % 4;
    return k == 0 || k == 3;
  }
  return c >= 41;
}

struct AdaptationGains {
  double eta_a{7.0};
  Vector88 damping{Vector88::Constant(0.05)};  // diagonal of Lambda
  Vector88 a_min{Vector88::Constant(-1e9)};
  Vector88 a_max{Vector88::Constant(1e9)};
  double bounds_gain{4.0};  // velocity-level gain on the parameter box
  // Rate floors for the mirrored FoV/focal rows: the estimate may tighten
  // those margins at this bounded rate even on the boundary, so that the
  // update can cross toward the measured truth while the controller keeps the
  // configuration-space margin non-negative at its recovery rate.
  double fov_margin_rate{2e-5};      // (cosine margin)/s
  double focal_margin_rate{5e-4};    // m/s

  void validate() const {
    if (!(eta_a > 0.0)) throw std::invalid_argument("AdaptationGains: eta_a <= 0");
    if ((damping.array() <= 0.0).any()) {
      throw std::invalid_argument("AdaptationGains: damping must be > 0");
    }
    if (((a_max - a_min).array() <= 0.0).any()) {
      throw std::invalid_argument("AdaptationGains: empty parameter box");
    }
  }
};

// Box bounds around the nominal parameters: +-10% (with a 5 mm floor) on
// lengths, +-10 degrees on angles.
inline AdaptationGains default_adaptation_gains(const Vector88& a_nominal) {
  AdaptationGains g;
  for (int c = 0; c < 88; ++c) {
    const double half = is_angular_parameter(c % 44)
                            ? 10.0 * M_PI / 180.0
                            : std::max(0.1 * std::abs(a_nominal(c)), 5e-3);
    g.a_min(c) = a_nominal(c) - half;
    g.a_max(c) = a_nominal(c) + half;
  }
  return g;
}

// y-tilde = y-hat - y (both pure unit directions in the optical frame).
struct MeasurementError {
  Quaternion y_tilde;

  Vec4 as_vec4() const { return vec4(y_tilde); }
  double norm() const { return y_tilde.norm(); }
};

inline MeasurementError measurement_error(const Quaternion& y_hat,
                                          const Quaternion& y) {
  return {y_hat - y};
}

namespace detail {

inline Matrix4x88 embed_r2_rotation_jacobian(const KinematicState& s2) {
  Matrix4x88 j = Matrix4x88::Zero();
  j.rightCols<44>() = s2.Jr_a;
  return j;
}

inline Matrix4x88 stacked_translation_difference_jacobian(
    const KinematicState& s1, const KinematicState& s2) {
  Matrix4x88 j;
  j.leftCols<44>() = s1.Jt_a;
  j.rightCols<44>() = -s2.Jt_a;
  return j;
}

}  // namespace detail

// Jacobian of the world-frame sight-line direction l = h/||h||, h = t1 - t2,
// with respect to the stacked parameter rates.
inline Matrix4x88 line_direction_param_jacobian(const KinematicState& s1,
                                                const KinematicState& s2) {
  const Quaternion h = s1.translation - s2.translation;
  return unit_vector_jacobian(
      h, Eigen::MatrixXd(detail::stacked_translation_difference_jacobian(s1, s2)));
}

// Jacobian of y-hat = Ad(r2*) l with respect to the stacked parameter rates:
// the rotation enters through both conjugations, the line through the middle.
inline Matrix4x88 adaptation_jacobian(const KinematicState& s1,
                                      const KinematicState& s2) {
  const Quaternion r2 = s2.rotation;
  const Quaternion l = estimated_line_direction(s1.translation, s2.translation);
  const Matrix4x88 jr2 = detail::embed_r2_rotation_jacobian(s2);
  const Matrix4x88 jl = line_direction_param_jacobian(s1, s2);

  const Matrix4x88 b1 =
      hamilton_minus4(l * r2) * conjugation_map4() * jr2;
  const Matrix4x88 b2 =
      hamilton_minus4(r2) * hamilton_plus4(r2.conj()) * jl;
  const Matrix4x88 b3 = hamilton_plus4(r2.conj() * l) * jr2;
  return b1 + b2 + b3;
}

// Equality rows confining parameter updates to directions that neither move
// the tool tip in the world frame nor rotate the camera about the sight line.
inline Matrix5x88 projector_rows(const KinematicState& s1,
                                 const KinematicState& s2) {
  const Quaternion l = estimated_line_direction(s1.translation, s2.translation);
  Matrix5x88 n = Matrix5x88::Zero();
  n.topLeftCorner<4, 44>() = s1.Jt_a;
  n.row(4) = 2.0 * vec4(l).transpose() * hamilton_minus4(s2.rotation.conj()) *
             detail::embed_r2_rotation_jacobian(s2);
  return n;
}

// Row of x-tilde' J_{x,a} over the parameter rates; keeping it <= 0 prevents
// the adaptation from increasing the task Lyapunov function to first order.
// The rotation block uses the error Jacobian d(r-hat* r_d)/da.
inline Eigen::RowVectorXd lyapunov_row(const KinematicState& s1,
                                       const KinematicState& s2,
                                       const TaskErrors& errors,
                                       const Quaternion& r1_d,
                                       const TaskGains& gains) {
  const double w_t1 = gains.beta * gains.alpha;
  const double w_r1 = gains.beta * (1.0 - gains.alpha);
  const double w_t2 = 1.0 - gains.beta;

  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(88);
  row.leftCols<44>() =
      w_t1 * vec4(errors.t1_tilde).transpose() * s1.Jt_a +
      w_r1 * vec4(errors.r1_tilde).transpose() *
          (hamilton_minus4(r1_d) * conjugation_map4() * s1.Jr_a);
  row.rightCols<44>() = w_t2 * vec4(errors.t2_tilde).transpose() * s2.Jt_a;
  return row;
}

struct AdaptTickResult {
  Vector88 u{Vector88::Zero()};
  QpStatus status{QpStatus::optimal};
  bool feasible{true};
  Quaternion y_hat;
  MeasurementError error;
};

// One adaptation step: drives the predicted line direction toward the
// measured one inside the parameter box, the task-space mirrors, the
// projector null space, and the Lyapunov descent half-space. The caller
// integrates a-hat += u * dt.
inline AdaptTickResult adapt_tick(const KinematicState& s1,
                                  const KinematicState& s2,
                                  const Vector88& a_hat, const Quaternion& y,
                                  const TaskErrors& errors,
                                  const Quaternion& r1_d,
                                  const TaskGains& task_gains,
                                  const AdaptationGains& gains,
                                  const ConstraintSet& parameter_rows,
                                  const QpOptions& opts = {}) {
  gains.validate();
  if (parameter_rows.dim != 88) {
    throw std::invalid_argument("adapt_tick: parameter rows must be over R^88");
  }

  AdaptTickResult out;
  out.y_hat = to_optical_frame(
      s2.rotation, estimated_line_direction(s1.translation, s2.translation));
  out.error = measurement_error(out.y_hat, y);

  const Matrix4x88 j = adaptation_jacobian(s1, s2);

  QpProblem qp;
  qp.H = 2.0 * (j.transpose() * j +
                Eigen::MatrixXd(gains.damping.array().square().matrix().asDiagonal()));
  qp.f = 2.0 * gains.eta_a * j.transpose() * out.error.as_vec4();

  const int extra = static_cast<int>(parameter_rows.rows.size());
  qp.A.resize(176 + extra + 1, 88);
  qp.b.resize(176 + extra + 1);
  for (int c = 0; c < 88; ++c) {
    qp.A.row(2 * c).setZero();
    qp.A(2 * c, c) = 1.0;
    qp.b(2 * c) = gains.bounds_gain * (gains.a_max(c) - a_hat(c));
    qp.A.row(2 * c + 1).setZero();
    qp.A(2 * c + 1, c) = -1.0;
    qp.b(2 * c + 1) = gains.bounds_gain * (a_hat(c) - gains.a_min(c));
  }
  if (extra > 0) {
    qp.A.middleRows(176, extra) = parameter_rows.matrix();
    qp.b.segment(176, extra) = parameter_rows.bounds();
  }
  qp.A.row(176 + extra) = lyapunov_row(s1, s2, errors, r1_d, task_gains);
  qp.b(176 + extra) = 0.0;

  qp.C = projector_rows(s1, s2);
  qp.d = Eigen::VectorXd::Zero(5);

  QpOptions tight = opts;
  tight.feasibility_tol = std::min(opts.feasibility_tol, 1e-10);
  const QpSolution sol = solve(qp, tight);
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
