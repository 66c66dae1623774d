#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "fovea/dual_quaternion.hpp"
#include "fovea/quaternion.hpp"

namespace fovea {

using Vector8 = Eigen::Matrix<double, 8, 1>;
using Vector16 = Eigen::Matrix<double, 16, 1>;
using Vector44 = Eigen::Matrix<double, 44, 1>;
using Vector88 = Eigen::Matrix<double, 88, 1>;
using Matrix4x8 = Eigen::Matrix<double, 4, 8>;
using Matrix4x44 = Eigen::Matrix<double, 4, 44>;

enum class JointType { revolute, prismatic };

struct JointLimits {
  double q_min{-2.8};
  double q_max{2.8};
  double v_max{1.5};
};

// One 8-DoF robot branch. The kinematic parameter vector has 44 entries:
//   [0..2]   base translation (x, y, z)            [m]
//   [3..5]   base rotation, intrinsic xyz Euler    [rad]
//   [6+4j..] joint j: theta_offset, d, a, alpha    [rad, m, m, rad]
//   [38..40] effector translation                  [m]
//   [41..43] effector rotation, intrinsic xyz Euler [rad]
// Revolute joints add q_j to theta_offset, prismatic joints add q_j to d.
struct SerialChainModel {
  static constexpr int kJointCount = 8;
  static constexpr int kParamCount = 44;

  std::array<JointType, kJointCount> joint_types{};
  std::array<std::array<double, 4>, kJointCount> dh{};  // theta_offset, d, a, alpha
  std::array<double, 6> base_pose{};                    // tx ty tz rx ry rz
  std::array<double, 6> effector_pose{};
  std::array<JointLimits, kJointCount> limits{};

  Vector44 nominal_parameters() const {
    Vector44 a;
    for (int i = 0; i < 6; ++i) a(i) = base_pose[i];
    for (int j = 0; j < kJointCount; ++j) {
      for (int k = 0; k < 4; ++k) a(6 + 4 * j + k) = dh[j][k];
    }
    for (int i = 0; i < 6; ++i) a(38 + i) = effector_pose[i];
    return a;
  }

  void validate() const {
    for (int j = 0; j < kJointCount; ++j) {
      if (!(limits[j].q_min < limits[j].q_max)) {
        throw std::invalid_argument("SerialChainModel: q_min >= q_max at joint " +
                                    std::to_string(j));
      }
      if (!(limits[j].v_max > 0.0)) {
        throw std::invalid_argument("SerialChainModel: v_max <= 0 at joint " +
                                    std::to_string(j));
      }
    }
  }
};

// Pose plus all four differential maps of one branch.
struct KinematicState {
  DualQuaternion pose;
  Quaternion rotation;     // r-hat
  Quaternion translation;  // t-hat, pure
  Matrix4x8 Jr_q{Matrix4x8::Zero()};
  Matrix4x8 Jt_q{Matrix4x8::Zero()};
  Matrix4x44 Jr_a{Matrix4x44::Zero()};
  Matrix4x44 Jt_a{Matrix4x44::Zero()};
};

// A point rigidly attached to a link, with its own differential maps.
struct PointState {
  Quaternion point;  // pure, world frame
  Matrix4x8 Jp_q{Matrix4x8::Zero()};
  Matrix4x44 Jp_a{Matrix4x44::Zero()};
};

namespace detail {

// The chain is a product of 40 elementary pose factors:
//   base:     T(t_b) Rx Ry Rz                        (factors 0..3)
//   joint j:  Rz(theta) Tz(d) Tx(a) Rx(alpha)        (factors 4+4j..7+4j)
//   effector: T(t_e) Rx Ry Rz                        (factors 36..39)
inline constexpr int kFactorCount = 40;

enum class Axis : int { x = 0, y = 1, z = 2 };

inline Quaternion axis_quat(Axis a) {
  switch (a) {
    case Axis::x: return {0.0, 1.0, 0.0, 0.0};
    case Axis::y: return {0.0, 0.0, 1.0, 0.0};
    default:      return {0.0, 0.0, 0.0, 1.0};
  }
}

struct ParamSite {
  int factor;
  Axis axis;
  bool rotational;
};

inline ParamSite param_site(int c) {
  if (c < 3) return {0, static_cast<Axis>(c), false};
  if (c < 6) return {1 + (c - 3), static_cast<Axis>(c - 3), true};
  if (c < 38) {
    const int j = (c - 6) / 4;
    const int k = (c - 6) % 4;
    const int base = 4 + 4 * j;
    switch (k) {
      case 0: return {base + 0, Axis::z, true};
      case 1: return {base + 1, Axis::z, false};
      case 2: return {base + 2, Axis::x, false};
      default: return {base + 3, Axis::x, true};
    }
  }
  if (c < 41) return {36, static_cast<Axis>(c - 38), false};
  return {37 + (c - 41), static_cast<Axis>(c - 41), true};
}

inline ParamSite joint_site(const SerialChainModel& model, int j) {
  const int c = model.joint_types[j] == JointType::revolute ? 6 + 4 * j
                                                            : 7 + 4 * j;
  return param_site(c);
}

inline DualQuaternion rotation_factor(Axis axis, double angle) {
  const double h = 0.5 * angle;
  const Quaternion u = axis_quat(axis);
  return DualQuaternion::from_rotation(
      Quaternion{std::cos(h), 0.0, 0.0, 0.0} + std::sin(h) * u);
}

inline DualQuaternion translation_factor(const Quaternion& t) {
  return DualQuaternion::from_translation(t);
}

// Derivative of a factor with respect to one of its scalar parameters.
inline DualQuaternion factor_derivative(const DualQuaternion& factor,
                                        const ParamSite& site) {
  const Quaternion u = axis_quat(site.axis);
  if (site.rotational) {
    return {0.5 * (u * factor.p), 0.5 * (u * factor.d)};
  }
  return {Quaternion{}, 0.5 * u};
}

struct ChainEvaluation {
  std::array<DualQuaternion, kFactorCount> factor;
  std::array<DualQuaternion, kFactorCount + 1> prefix;
  std::array<DualQuaternion, kFactorCount + 1> suffix;
  int cut;  // last factor index included
  DualQuaternion pose;
  Quaternion r;
  Quaternion t;

  // d/ds of (r, t) given the derivative of the whole product.
  void accumulate(const DualQuaternion& dx, Eigen::Ref<Vec4> jr_col,
                  Eigen::Ref<Vec4> jt_col) const {
    jr_col = vec4(dx.p);
    jt_col = vec4(2.0 * (dx.d * pose.p.conj()) + 2.0 * (pose.d * dx.p.conj()));
  }

  DualQuaternion derivative_at(int factor_idx, const DualQuaternion& dfac) const {
    return prefix[factor_idx] * dfac * suffix[factor_idx];
  }
};

inline void build_factors(const SerialChainModel& model, const Vector8& q,
                          const Vector44& a, ChainEvaluation& ev) {
  ev.factor[0] = translation_factor({0.0, a(0), a(1), a(2)});
  ev.factor[1] = rotation_factor(Axis::x, a(3));
  ev.factor[2] = rotation_factor(Axis::y, a(4));
  ev.factor[3] = rotation_factor(Axis::z, a(5));
  for (int j = 0; j < SerialChainModel::kJointCount; ++j) {
    const bool revolute = model.joint_types[j] == JointType::revolute;
    const double theta = a(6 + 4 * j) + (revolute ? q(j) : 0.0);
    const double d = a(7 + 4 * j) + (revolute ? 0.0 : q(j));
    ev.factor[4 + 4 * j] = rotation_factor(Axis::z, theta);
    ev.factor[5 + 4 * j] = translation_factor({0.0, 0.0, 0.0, d});
    ev.factor[6 + 4 * j] = translation_factor({0.0, a(8 + 4 * j), 0.0, 0.0});
    ev.factor[7 + 4 * j] = rotation_factor(Axis::x, a(9 + 4 * j));
  }
  ev.factor[36] = translation_factor({0.0, a(38), a(39), a(40)});
  ev.factor[37] = rotation_factor(Axis::x, a(41));
  ev.factor[38] = rotation_factor(Axis::y, a(42));
  ev.factor[39] = rotation_factor(Axis::z, a(43));
}

inline void evaluate_chain(const SerialChainModel& model, const Vector8& q,
                           const Vector44& a, int cut, ChainEvaluation& ev) {
  if (!q.allFinite() || !a.allFinite()) {
    throw std::invalid_argument("kinematics: non-finite joint or parameter value");
  }
  build_factors(model, q, a, ev);
  ev.cut = cut;
  ev.prefix[0] = DualQuaternion::identity();
  for (int i = 0; i <= cut; ++i) ev.prefix[i + 1] = ev.prefix[i] * ev.factor[i];
  ev.suffix[cut] = DualQuaternion::identity();
  for (int i = cut - 1; i >= 0; --i) ev.suffix[i] = ev.factor[i + 1] * ev.suffix[i + 1];
  ev.pose = ev.prefix[cut + 1];
  ev.r = ev.pose.rotation();
  ev.t = ev.pose.translation();
}

}  // namespace detail

// Last factor included when the chain is cut at a link.
// link 0 = base frame, link 1..8 = frame after joint k, link 9 = effector.
inline int link_cut_factor(int link) {
  if (link < 0 || link > 9) {
    throw std::invalid_argument("link index must be in [0, 9]");
  }
  if (link == 0) return 3;
  if (link <= 8) return 4 * link + 3;
  return detail::kFactorCount - 1;
}

inline KinematicState forward_kinematics(const SerialChainModel& model,
                                         const Vector8& q, const Vector44& a) {
  detail::ChainEvaluation ev;
  detail::evaluate_chain(model, q, a, detail::kFactorCount - 1, ev);

  KinematicState out;
  out.pose = ev.pose;
  out.rotation = ev.r;
  out.translation = ev.t;

  for (int j = 0; j < SerialChainModel::kJointCount; ++j) {
    const auto site = detail::joint_site(model, j);
    const auto dfac = detail::factor_derivative(ev.factor[site.factor], site);
    const auto dx = ev.derivative_at(site.factor, dfac);
    ev.accumulate(dx, out.Jr_q.col(j), out.Jt_q.col(j));
  }
  for (int c = 0; c < SerialChainModel::kParamCount; ++c) {
    const auto site = detail::param_site(c);
    const auto dfac = detail::factor_derivative(ev.factor[site.factor], site);
    const auto dx = ev.derivative_at(site.factor, dfac);
    ev.accumulate(dx, out.Jr_a.col(c), out.Jt_a.col(c));
  }
  return out;
}

// World position and differential maps of a point attached to `link` with a
// fixed offset in the link frame. Columns of factors beyond the cut are zero.
inline PointState point_kinematics(const SerialChainModel& model,
                                   const Vector8& q, const Vector44& a,
                                   int link, const Vec3& offset) {
  const int cut = link_cut_factor(link);
  detail::ChainEvaluation ev;
  detail::evaluate_chain(model, q, a, cut, ev);

  const Quaternion o = Quaternion::pure(offset);
  PointState out;
  out.point = ev.t + ev.r * o * ev.r.conj();
  const Mat4 m = adjoint_jacobian_wrt_rotation(ev.r, o);

  Vec4 jr_col;
  Vec4 jt_col;
  for (int j = 0; j < SerialChainModel::kJointCount; ++j) {
    const auto site = detail::joint_site(model, j);
    if (site.factor > cut) continue;
    const auto dfac = detail::factor_derivative(ev.factor[site.factor], site);
    const auto dx = ev.derivative_at(site.factor, dfac);
    ev.accumulate(dx, jr_col, jt_col);
    out.Jp_q.col(j) = jt_col + m * jr_col;
  }
  for (int c = 0; c < SerialChainModel::kParamCount; ++c) {
    const auto site = detail::param_site(c);
    if (site.factor > cut) continue;
    const auto dfac = detail::factor_derivative(ev.factor[site.factor], site);
    const auto dx = ev.derivative_at(site.factor, dfac);
    ev.accumulate(dx, jr_col, jt_col);
    out.Jp_a.col(c) = jt_col + m * jr_col;
  }
  return out;
}

// Max relative deviation between the analytic Jacobians and central finite
// differences of the forward kinematics: max |analytic - fd| / (1 + |analytic|).
inline double jacobians_fd_check(const SerialChainModel& model, const Vector8& q,
                                 const Vector44& a, double eps) {
  const KinematicState s = forward_kinematics(model, q, a);
  double worst = 0.0;
  const auto update = [&worst](const Vec4& analytic, const Vec4& fd) {
    for (int i = 0; i < 4; ++i) {
      const double err = std::abs(analytic(i) - fd(i)) / (1.0 + std::abs(analytic(i)));
      worst = std::max(worst, err);
    }
  };

  for (int j = 0; j < SerialChainModel::kJointCount; ++j) {
    Vector8 qp = q, qm = q;
    qp(j) += eps;
    qm(j) -= eps;
    const auto sp = forward_kinematics(model, qp, a);
    const auto sm = forward_kinematics(model, qm, a);
    update(s.Jr_q.col(j), (vec4(sp.rotation) - vec4(sm.rotation)) / (2.0 * eps));
    update(s.Jt_q.col(j), (vec4(sp.translation) - vec4(sm.translation)) / (2.0 * eps));
  }
  for (int c = 0; c < SerialChainModel::kParamCount; ++c) {
    Vector44 ap = a, am = a;
    ap(c) += eps;
    am(c) -= eps;
    const auto sp = forward_kinematics(model, q, ap);
    const auto sm = forward_kinematics(model, q, am);
    update(s.Jr_a.col(c), (vec4(sp.rotation) - vec4(sm.rotation)) / (2.0 * eps));
    update(s.Jt_a.col(c), (vec4(sp.translation) - vec4(sm.translation)) / (2.0 * eps));
  }
  return worst;
}

}  // namespace fovea
