#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fovea/camera.hpp"
#include "fovea/dual_quaternion.hpp"
#include "fovea/kinematics.hpp"
#include "fovea/quaternion.hpp"

namespace fovea {

enum class ConstraintKind : std::uint8_t {
  joint_limit,
  point_point,
  point_plane,
  point_line,
  fov_cone,
  focal_near,
  focal_far,
};

inline std::uint32_t kind_bit(ConstraintKind k) {
  return 1u << static_cast<std::uint8_t>(k);
}

// One row of "coeffs * u <= bound" over the stacked decision variable.
struct ConstraintRow {
  Eigen::RowVectorXd coeffs;
  double bound{0.0};
  ConstraintKind kind{ConstraintKind::joint_limit};
};

struct ConstraintSet {
  explicit ConstraintSet(int dimension) : dim(dimension) {}

  int dim;
  std::vector<ConstraintRow> rows;

  void add(ConstraintRow row) {
    if (row.coeffs.size() != dim) {
      throw std::invalid_argument("ConstraintSet: row dimension mismatch");
    }
    if (!row.coeffs.allFinite() || !std::isfinite(row.bound)) {
      throw std::invalid_argument("ConstraintSet: non-finite constraint row");
    }
    rows.push_back(std::move(row));
  }

  void add(std::optional<ConstraintRow> row) {
    if (row) add(std::move(*row));
  }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd a(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) a.row(i) = rows[i].coeffs;
    return a;
  }

  Eigen::VectorXd bounds() const {
    Eigen::VectorXd b(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) b(i) = rows[i].bound;
    return b;
  }
};

enum class ZoneDirection { keep_out, keep_in };

struct Plane {
  Vec3 normal{0.0, 0.0, 1.0};  // unit
  double offset{0.0};          // n . p = offset on the plane
};

namespace detail {

// distance rate row:  keep_out enforces d-dot >= -eta (d - d_safe),
// keep_in the mirrored pair; both normalized to "coeffs u <= bound".
// A violated margin recovers at eta_recover instead of eta (eta_recover < 0
// means "same as eta").
inline ConstraintRow distance_rate_row(const Eigen::RowVectorXd& j_d, double d,
                                       double d_safe, double eta,
                                       ZoneDirection dir, ConstraintKind kind,
                                       double eta_recover = -1.0) {
  ConstraintRow row;
  row.kind = kind;
  const double margin =
      dir == ZoneDirection::keep_out ? d - d_safe : d_safe - d;
  const double rate = margin >= 0.0 || eta_recover < 0.0 ? eta : eta_recover;
  row.coeffs = dir == ZoneDirection::keep_out ? Eigen::RowVectorXd(-j_d) : j_d;
  row.bound = rate * margin;
  return row;
}

inline Eigen::RowVectorXd vec3_dot_rows(const Vec3& v,
                                        const Eigen::MatrixXd& j4) {
  return v.transpose() * j4.bottomRows(3);
}

}  // namespace detail

// Point Jacobians below are vec4 maps (4 x n) over the stacked decision
// variable; the w row is identically zero for pure quantities.

inline std::optional<ConstraintRow> point_point_row(
    const Vec3& pa, const Eigen::MatrixXd& jpa, const Vec3& pb,
    const Eigen::MatrixXd& jpb, double d_safe, double eta, ZoneDirection dir,
    double eta_recover = -1.0) {
  const Vec3 diff = pa - pb;
  const double d = diff.norm();
  if (d < 1e-9) return std::nullopt;  // zero distance Jacobian, skip
  const Eigen::RowVectorXd j_d =
      detail::vec3_dot_rows(diff / d, Eigen::MatrixXd(jpa - jpb));
  return detail::distance_rate_row(j_d, d, d_safe, eta, dir,
                                   ConstraintKind::point_point, eta_recover);
}

inline ConstraintRow point_plane_row(const Vec3& p, const Eigen::MatrixXd& jp,
                                     const Plane& plane, double d_safe,
                                     double eta, double eta_recover = -1.0) {
  const double d = plane.normal.dot(p) - plane.offset;
  const Eigen::RowVectorXd j_d = detail::vec3_dot_rows(plane.normal, jp);
  return detail::distance_rate_row(j_d, d, d_safe, eta, ZoneDirection::keep_out,
                                   ConstraintKind::point_plane, eta_recover);
}

inline std::optional<ConstraintRow> point_line_row(
    const Vec3& p, const Eigen::MatrixXd& jp, const PluckerLine& line,
    double d_safe, double eta, ZoneDirection dir = ZoneDirection::keep_out,
    double eta_recover = -1.0) {
  const Vec3 l = vec3(line.direction);
  const Vec3 m = vec3(line.moment, 1e-9);
  const Vec3 e = p.cross(l) - m;
  const double d = e.norm();
  if (d < 1e-9) return std::nullopt;
  const Eigen::RowVectorXd j_d = detail::vec3_dot_rows(l.cross(e) / d, jp);
  return detail::distance_rate_row(j_d, d, d_safe, eta, dir,
                                   ConstraintKind::point_line, eta_recover);
}

// Cone margin between the optical axis of the camera at (r2, t2) and the
// sight line toward t1:  g = <axis_world, l> - cos(theta_safe).
inline double fov_cone_margin(const Quaternion& r2, const Quaternion& t1,
                              const Quaternion& t2, double theta_safe) {
  const Quaternion axis = adjoint(r2, {0.0, 0.0, 0.0, -1.0});
  const Quaternion l = estimated_line_direction(t1, t2);
  return dot(axis, l) - std::cos(theta_safe);
}

// Row keeping the tool tip inside the camera cone; Jacobians are embedded in
// the stacked decision variable (R^16 for q-dot, R^88 for the parameter rates).
inline std::optional<ConstraintRow> fov_cone_row(
    const Quaternion& r2, const Eigen::MatrixXd& jr2, const Quaternion& t1,
    const Eigen::MatrixXd& jt1, const Quaternion& t2,
    const Eigen::MatrixXd& jt2, double theta_safe, double eta,
    double eta_recover = -1.0) {
  const Quaternion h = t1 - t2;
  if (h.norm() <= kMinLineSeparation) return std::nullopt;
  const Quaternion optical_axis{0.0, 0.0, 0.0, -1.0};
  const Quaternion axis_world = adjoint(r2, optical_axis);
  const Quaternion l = estimated_line_direction(t1, t2);

  const Eigen::MatrixXd j_axis =
      adjoint_jacobian_wrt_rotation(r2, optical_axis) * jr2;
  const Eigen::MatrixXd j_line = unit_vector_jacobian(h, Eigen::MatrixXd(jt1 - jt2));
  const Eigen::RowVectorXd j_g =
      vec4(l).transpose() * j_axis + vec4(axis_world).transpose() * j_line;

  const double g = dot(axis_world, l) - std::cos(theta_safe);
  const double rate = g >= 0.0 || eta_recover < 0.0 ? eta : eta_recover;
  ConstraintRow row;
  row.kind = ConstraintKind::fov_cone;
  row.coeffs = -j_g;
  row.bound = rate * g;
  return row;
}

// Complementary pair keeping ||t1 - t2|| inside [d_image - band, d_image + band].
inline std::array<ConstraintRow, 2> focal_band_rows(
    const Quaternion& t1, const Eigen::MatrixXd& jt1, const Quaternion& t2,
    const Eigen::MatrixXd& jt2, double d_image, double band, double eta,
    double eta_recover = -1.0) {
  if (!(band > 0.0)) {
    throw std::invalid_argument("focal_band_rows: band must be > 0");
  }
  const Quaternion h = t1 - t2;
  const double dist = h.norm();
  if (dist <= kMinLineSeparation) {
    throw std::domain_error("focal_band_rows: degenerate camera/tool geometry");
  }
  const Eigen::RowVectorXd j_d =
      (vec4(h).transpose() / dist) * (jt1 - jt2);
  ConstraintRow near = detail::distance_rate_row(
      j_d, dist, d_image - band, eta, ZoneDirection::keep_out,
      ConstraintKind::focal_near, eta_recover);
  ConstraintRow far = detail::distance_rate_row(
      j_d, dist, d_image + band, eta, ZoneDirection::keep_in,
      ConstraintKind::focal_far, eta_recover);
  return {std::move(near), std::move(far)};
}

// Joint position/velocity limits as 2 rows per joint over a stacked variable
// of width `dim`, the arm occupying columns [col_offset, col_offset + 8).
inline std::vector<ConstraintRow> joint_limit_rows(const SerialChainModel& model,
                                                   const Vector8& q, double eta_j,
                                                   int dim, int col_offset) {
  std::vector<ConstraintRow> rows;
  rows.reserve(2 * SerialChainModel::kJointCount);
  for (int j = 0; j < SerialChainModel::kJointCount; ++j) {
    const auto& lim = model.limits[j];
    ConstraintRow upper;
    upper.kind = ConstraintKind::joint_limit;
    upper.coeffs = Eigen::RowVectorXd::Zero(dim);
    upper.coeffs(col_offset + j) = 1.0;
    upper.bound = std::min(lim.v_max, eta_j * (lim.q_max - q(j)));
    rows.push_back(std::move(upper));

    ConstraintRow lower;
    lower.kind = ConstraintKind::joint_limit;
    lower.coeffs = Eigen::RowVectorXd::Zero(dim);
    lower.coeffs(col_offset + j) = -1.0;
    lower.bound = std::min(lim.v_max, eta_j * (q(j) - lim.q_min));
    rows.push_back(std::move(lower));
  }
  return rows;
}

// --- collision geometry -----------------------------------------------------

struct AttachedPoint {
  int robot{0};  // 0 = R1, 1 = R2
  int link{8};
  Vec3 offset{Vec3::Zero()};
};

struct PointPlanePair {
  AttachedPoint point;
  Plane plane;
  double safe_distance{0.01};
};

struct PointLinePair {
  AttachedPoint point;
  Vec3 line_point{Vec3::Zero()};
  Vec3 line_direction{0.0, 0.0, 1.0};
  double safe_distance{0.05};
};

struct PointPointPair {
  AttachedPoint a;
  AttachedPoint b;
  double safe_distance{0.05};
};

struct CollisionGeometry {
  std::vector<PointPlanePair> plane_pairs;
  std::vector<PointLinePair> line_pairs;
  std::vector<PointPointPair> robot_pairs;
  double eta_d{2.0};
  double eta_recover{30.0};  // rate applied to violated margins

  void validate() const {
    if (!(eta_d > 0.0)) throw std::invalid_argument("CollisionGeometry: eta_d <= 0");
    if (!(eta_recover > 0.0)) {
      throw std::invalid_argument("CollisionGeometry: eta_recover <= 0");
    }
    const auto check = [](double d) {
      if (!(d > 0.0)) {
        throw std::invalid_argument("CollisionGeometry: safe distance <= 0");
      }
    };
    for (const auto& pp : plane_pairs) check(pp.safe_distance);
    for (const auto& pl : line_pairs) check(pl.safe_distance);
    for (const auto& rr : robot_pairs) check(rr.safe_distance);
  }
};

// Embeds a per-arm Jacobian block into the stacked two-arm variable.
inline Eigen::MatrixXd embed_arm_block(const Eigen::MatrixXd& j, int robot,
                                       bool parameter_space) {
  const int block = parameter_space ? SerialChainModel::kParamCount
                                    : SerialChainModel::kJointCount;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(j.rows(), 2 * block);
  out.middleCols(robot * block, block) = j;
  return out;
}

namespace detail {

inline Eigen::MatrixXd embedded_point_jacobian(const PointState& ps, int robot,
                                               bool parameter_space) {
  return parameter_space ? embed_arm_block(ps.Jp_a, robot, true)
                         : embed_arm_block(ps.Jp_q, robot, false);
}

}  // namespace detail

// Builds all collision VFI rows over the stacked variable; `parameter_space`
// switches the rows from joint velocities (R^16) to parameter rates (R^88).
inline void append_collision_rows(ConstraintSet& set,
                                  const SerialChainModel& model1,
                                  const Vector8& q1, const Vector44& a1,
                                  const SerialChainModel& model2,
                                  const Vector8& q2, const Vector44& a2,
                                  const CollisionGeometry& geom,
                                  bool parameter_space) {
  const auto point_state = [&](const AttachedPoint& ap) {
    return ap.robot == 0 ? point_kinematics(model1, q1, a1, ap.link, ap.offset)
                         : point_kinematics(model2, q2, a2, ap.link, ap.offset);
  };

  for (const auto& pp : geom.plane_pairs) {
    const PointState ps = point_state(pp.point);
    const auto j = detail::embedded_point_jacobian(ps, pp.point.robot,
                                                   parameter_space);
    set.add(point_plane_row(vec3(ps.point, 1e-9), j, pp.plane,
                            pp.safe_distance, geom.eta_d, geom.eta_recover));
  }
  for (const auto& pl : geom.line_pairs) {
    const PointState ps = point_state(pl.point);
    const auto j = detail::embedded_point_jacobian(ps, pl.point.robot,
                                                   parameter_space);
    const auto line = PluckerLine::through_point(
        Quaternion::pure(pl.line_direction.normalized()),
        Quaternion::pure(pl.line_point));
    set.add(point_line_row(vec3(ps.point, 1e-9), j, line, pl.safe_distance,
                           geom.eta_d, ZoneDirection::keep_out,
                           geom.eta_recover));
  }
  for (const auto& rr : geom.robot_pairs) {
    const PointState pa = point_state(rr.a);
    const PointState pb = point_state(rr.b);
    const auto ja = detail::embedded_point_jacobian(pa, rr.a.robot,
                                                    parameter_space);
    const auto jb = detail::embedded_point_jacobian(pb, rr.b.robot,
                                                    parameter_space);
    set.add(point_point_row(vec3(pa.point, 1e-9), ja, vec3(pb.point, 1e-9), jb,
                            rr.safe_distance, geom.eta_d,
                            ZoneDirection::keep_out, geom.eta_recover));
  }
}

}  // namespace fovea
