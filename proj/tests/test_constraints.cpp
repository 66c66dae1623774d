#include <cmath>

#include <gtest/gtest.h>

#include "fovea/constraints.hpp"
#include "fovea/fd_check.hpp"
#include "fovea/qp.hpp"
#include "fovea/rng.hpp"
#include "support/test_models.hpp"

using namespace fovea;
namespace ts = fovea::testsupport;

namespace {

constexpr double kEta = 2.0;

Eigen::MatrixXd synthetic_point_jacobian(int dim, int col0) {
  // vec4 rows of an identity point Jacobian occupying 3 columns
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(4, dim);
  j(1, col0) = 1.0;
  j(2, col0 + 1) = 1.0;
  j(3, col0 + 2) = 1.0;
  return j;
}

struct TwoArmFixture {
  SerialChainModel m1;
  SerialChainModel m2;
  Vector8 q1;
  Vector8 q2;
  Vector44 a1;
  Vector44 a2;

  static TwoArmFixture random(Rng& rng) {
    TwoArmFixture f;
    f.m1 = ts::random_model(rng);
    f.m2 = ts::random_model(rng);
    f.q1 = ts::random_q(rng);
    f.q2 = ts::random_q(rng);
    f.a1 = ts::random_parameters(rng);
    f.a2 = ts::random_parameters(rng);
    return f;
  }

  KinematicState s1() const { return forward_kinematics(m1, q1, a1); }
  KinematicState s2() const { return forward_kinematics(m2, q2, a2); }

  double cone_margin(const Vector16& q, double theta_safe) const {
    const auto sa = forward_kinematics(m1, q.head<8>(), a1);
    const auto sb = forward_kinematics(m2, q.tail<8>(), a2);
    return fov_cone_margin(sb.rotation, sa.translation, sb.translation,
                           theta_safe);
  }
};

}  // namespace

TEST(PointPoint, UnitOffsetGeometry) {
  const Vec3 pa(1.0, 0.0, 0.0);
  const Vec3 pb(0.0, 0.0, 0.0);
  const auto ja = synthetic_point_jacobian(6, 0);
  const Eigen::MatrixXd jb = Eigen::MatrixXd::Zero(4, 6);  // static obstacle
  const auto row =
      point_point_row(pa, ja, pb, jb, 0.5, kEta, ZoneDirection::keep_out);
  ASSERT_TRUE(row.has_value());
  // J_d = (1,0,0) in pa's columns; keep-out row negates it
  EXPECT_LT((row->coeffs - (Eigen::RowVectorXd(6) << -1, 0, 0, 0, 0, 0).finished())
                .cwiseAbs()
                .maxCoeff(),
            1e-14);
  EXPECT_NEAR(row->bound, kEta * 0.5, 1e-14);
}

TEST(PointPoint, ActiveBoundaryHasZeroBound) {
  const Vec3 pa(0.3, 0.0, 0.0);
  const auto row = point_point_row(pa, synthetic_point_jacobian(3, 0),
                                   Vec3::Zero(), Eigen::MatrixXd::Zero(4, 3),
                                   0.3, kEta, ZoneDirection::keep_out);
  ASSERT_TRUE(row.has_value());
  EXPECT_NEAR(row->bound, 0.0, 1e-14);
}

TEST(PointPoint, CoincidentPointsSkipped) {
  const auto row = point_point_row(Vec3::Zero(), synthetic_point_jacobian(3, 0),
                                   Vec3::Zero(), Eigen::MatrixXd::Zero(4, 3),
                                   0.3, kEta, ZoneDirection::keep_out);
  EXPECT_FALSE(row.has_value());
}

TEST(PointPoint, JacobianMatchesFiniteDifferences) {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = TwoArmFixture::random(rng);
    const Vec3 offset_a(0.1, -0.05, 0.2);
    const Vec3 offset_b(-0.1, 0.15, 0.0);
    const auto pa = point_kinematics(f.m1, f.q1, f.a1, 8, offset_a);
    const auto pb = point_kinematics(f.m2, f.q2, f.a2, 7, offset_b);
    if ((vec3(pa.point, 1e-9) - vec3(pb.point, 1e-9)).norm() < 0.05) continue;

    const auto row = point_point_row(
        vec3(pa.point, 1e-9), embed_arm_block(pa.Jp_q, 0, false),
        vec3(pb.point, 1e-9), embed_arm_block(pb.Jp_q, 1, false), 0.1, kEta,
        ZoneDirection::keep_out);
    ASSERT_TRUE(row.has_value());

    const auto dist = [&](const Eigen::VectorXd& q16) -> Eigen::VectorXd {
      const auto wa =
          point_kinematics(f.m1, Vector8(q16.head<8>()), f.a1, 8, offset_a);
      const auto wb =
          point_kinematics(f.m2, Vector8(q16.tail<8>()), f.a2, 7, offset_b);
      Eigen::VectorXd out(1);
      out(0) = (vec3(wa.point, 1e-9) - vec3(wb.point, 1e-9)).norm();
      return out;
    };
    Eigen::VectorXd q16(16);
    q16 << f.q1, f.q2;
    const Eigen::MatrixXd fd = central_difference_jacobian(dist, q16, 1e-6);
    EXPECT_LT(max_relative_error(-row->coeffs, fd), 1e-6);
  }
}

TEST(PointPlane, ExamplesAndFiniteDifferences) {
  const Plane ground{Vec3(0, 0, 1), 0.0};
  // point 1 m above, d_safe = 0.1
  auto row = point_plane_row(Vec3(0.2, -0.1, 1.0), synthetic_point_jacobian(3, 0),
                             ground, 0.1, kEta);
  EXPECT_NEAR(row.bound, 0.9 * kEta, 1e-14);
  // point on the plane: infeasible direction blocked
  row = point_plane_row(Vec3(0.0, 0.0, 0.0), synthetic_point_jacobian(3, 0),
                        ground, 0.1, kEta);
  EXPECT_NEAR(row.bound, -kEta * 0.1, 1e-14);

  Rng rng(62);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = TwoArmFixture::random(rng);
    const Vec3 offset(0.0, 0.1, -0.05);
    const auto ps = point_kinematics(f.m1, f.q1, f.a1, 6, offset);
    const Plane plane{Vec3(0.3, -0.2, 0.93).normalized(), -0.4};
    const auto r =
        point_plane_row(vec3(ps.point, 1e-9), Eigen::MatrixXd(ps.Jp_q), plane,
                        0.05, kEta);
    const auto dist = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
      const auto w = point_kinematics(f.m1, Vector8(q), f.a1, 6, offset);
      Eigen::VectorXd out(1);
      out(0) = plane.normal.dot(vec3(w.point, 1e-9)) - plane.offset;
      return out;
    };
    const Eigen::MatrixXd fd = central_difference_jacobian(dist, f.q1, 1e-6);
    EXPECT_LT(max_relative_error(-r.coeffs, fd), 1e-6);
  }
}

TEST(PointLine, FiniteDifferences) {
  Rng rng(63);
  const auto line = PluckerLine::through_point(Quaternion::pure({0, 0, 1}),
                                               Quaternion::pure({0.1, 0.2, 0.0}));
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = TwoArmFixture::random(rng);
    const auto ps = point_kinematics(f.m1, f.q1, f.a1, 8, Vec3(0.05, 0, 0));
    const auto row = point_line_row(vec3(ps.point, 1e-9),
                                    Eigen::MatrixXd(ps.Jp_q), line, 0.05, kEta);
    if (!row) continue;
    const auto dist = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
      const auto w = point_kinematics(f.m1, Vector8(q), f.a1, 8, Vec3(0.05, 0, 0));
      const Vec3 p = vec3(w.point, 1e-9);
      const Vec3 l = vec3(line.direction);
      const Vec3 m = vec3(line.moment, 1e-9);
      Eigen::VectorXd out(1);
      out(0) = (p.cross(l) - m).norm();
      return out;
    };
    const Eigen::MatrixXd fd = central_difference_jacobian(dist, f.q1, 1e-6);
    EXPECT_LT(max_relative_error(-row->coeffs, fd), 1e-6);
  }
}

TEST(FovCone, MarginExamples) {
  const double theta_safe = 0.55 * M_PI / 180.0;
  // camera at origin looking along -k (identity rotation), tip below
  const Quaternion r2{1, 0, 0, 0};
  const Quaternion t2{0, 0, 0, 0};
  const Quaternion tip_on_axis{0, 0, 0, -0.405};
  EXPECT_NEAR(fov_cone_margin(r2, tip_on_axis, t2, theta_safe),
              1.0 - std::cos(theta_safe), 1e-12);

  // tip exactly on the cone boundary
  const Quaternion tip_on_cone{0, 0.405 * std::sin(theta_safe), 0.0,
                               -0.405 * std::cos(theta_safe)};
  EXPECT_NEAR(fov_cone_margin(r2, tip_on_cone, t2, theta_safe), 0.0, 1e-12);
}

TEST(FovCone, RowMatchesFiniteDifferenceOfMargin) {
  Rng rng(64);
  const double theta_safe = 0.2;
  int done = 0;
  while (done < 15) {
    const auto f = TwoArmFixture::random(rng);
    const auto s1 = f.s1();
    const auto s2 = f.s2();
    if ((s1.translation - s2.translation).norm() < 0.05) continue;
    const auto row = fov_cone_row(
        s2.rotation, embed_arm_block(s2.Jr_q, 1, false), s1.translation,
        embed_arm_block(s1.Jt_q, 0, false), s2.translation,
        embed_arm_block(s2.Jt_q, 1, false), theta_safe, kEta);
    ASSERT_TRUE(row.has_value());

    const auto margin = [&](const Eigen::VectorXd& q16) -> Eigen::VectorXd {
      Eigen::VectorXd out(1);
      out(0) = f.cone_margin(Vector16(q16), theta_safe);
      return out;
    };
    Eigen::VectorXd q16(16);
    q16 << f.q1, f.q2;
    const Eigen::MatrixXd fd = central_difference_jacobian(margin, q16, 1e-6);
    EXPECT_LT(max_relative_error(-row->coeffs, fd), 1e-5);
    ++done;
  }
}

// Same cone function over the stacked parameter rates instead of q-dot.
TEST(FovCone, ParameterSpaceRowMatchesFiniteDifferences) {
  Rng rng(65);
  const double theta_safe = 0.2;
  int done = 0;
  while (done < 10) {
    const auto f = TwoArmFixture::random(rng);
    const auto s1 = f.s1();
    const auto s2 = f.s2();
    if ((s1.translation - s2.translation).norm() < 0.05) continue;
    const auto row = fov_cone_row(
        s2.rotation, embed_arm_block(s2.Jr_a, 1, true), s1.translation,
        embed_arm_block(s1.Jt_a, 0, true), s2.translation,
        embed_arm_block(s2.Jt_a, 1, true), theta_safe, kEta);
    ASSERT_TRUE(row.has_value());

    const auto margin = [&](const Eigen::VectorXd& a88) -> Eigen::VectorXd {
      const auto sa = forward_kinematics(f.m1, f.q1, Vector44(a88.head<44>()));
      const auto sb = forward_kinematics(f.m2, f.q2, Vector44(a88.tail<44>()));
      Eigen::VectorXd out(1);
      out(0) = fov_cone_margin(sb.rotation, sa.translation, sb.translation,
                               theta_safe);
      return out;
    };
    Eigen::VectorXd a88(88);
    a88 << f.a1, f.a2;
    const Eigen::MatrixXd fd = central_difference_jacobian(margin, a88, 1e-6);
    EXPECT_LT(max_relative_error(-row->coeffs, fd), 1e-5);
    ++done;
  }
}

TEST(FocalBand, InteriorBoundsAndMirroredJacobians) {
  Rng rng(66);
  const auto f = TwoArmFixture::random(rng);
  const auto s1 = f.s1();
  const auto s2 = f.s2();
  const double dist = (s1.translation - s2.translation).norm();
  ASSERT_GT(dist, kMinLineSeparation);

  const auto rows = focal_band_rows(
      s1.translation, embed_arm_block(s1.Jt_q, 0, false), s2.translation,
      embed_arm_block(s2.Jt_q, 1, false), dist, 0.005, kEta);
  // exactly at d_image: both rows strictly interior with bound eta*band
  EXPECT_NEAR(rows[0].bound, kEta * 0.005, 1e-12);
  EXPECT_NEAR(rows[1].bound, kEta * 0.005, 1e-12);
  EXPECT_LT((rows[0].coeffs + rows[1].coeffs).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(
      focal_band_rows(s1.translation, embed_arm_block(s1.Jt_q, 0, false),
                      s2.translation, embed_arm_block(s2.Jt_q, 1, false), dist,
                      0.0, kEta),
      std::invalid_argument);
}

TEST(JointLimits, CenteredAndSaturatedBounds) {
  SerialChainModel m;
  for (int j = 0; j < 8; ++j) {
    m.joint_types[j] = JointType::revolute;
    m.limits[j] = {-1.0, 1.0, 0.5};
  }
  const auto centered = joint_limit_rows(m, Vector8::Zero(), 4.0, 8, 0);
  ASSERT_EQ(centered.size(), 16u);
  for (const auto& row : centered) EXPECT_NEAR(row.bound, 0.5, 1e-14);

  Vector8 q = Vector8::Zero();
  q(2) = 1.0;  // at q_max
  const auto saturated = joint_limit_rows(m, q, 4.0, 8, 0);
  EXPECT_NEAR(saturated[4].bound, 0.0, 1e-14);   // upper row of joint 2
  EXPECT_NEAR(saturated[5].bound, 0.5, 1e-14);   // lower still velocity-limited
}

TEST(JointLimits, OneEulerStepStaysWithinLimits) {
  Rng rng(67);
  SerialChainModel m;
  for (int j = 0; j < 8; ++j) {
    m.joint_types[j] = JointType::revolute;
    m.limits[j] = {-0.8, 1.2, 1.0};
  }
  const double dt = 1.0 / 32.0;
  const double eta_j = 4.0;
  for (int trial = 0; trial < 200; ++trial) {
    Vector8 q;
    for (int j = 0; j < 8; ++j) q(j) = rng.uniform(-0.8, 1.2);
    const auto rows = joint_limit_rows(m, q, eta_j, 8, 0);
    // sample a velocity satisfying every row
    Vector8 qdot;
    for (int j = 0; j < 8; ++j) {
      const double hi = rows[2 * j].bound;
      const double lo = -rows[2 * j + 1].bound;
      qdot(j) = rng.uniform(lo, hi);
    }
    const Vector8 stepped = q + dt * qdot;
    for (int j = 0; j < 8; ++j) {
      EXPECT_GE(stepped(j), m.limits[j].q_min - 1e-12);
      EXPECT_LE(stepped(j), m.limits[j].q_max + 1e-12);
    }
  }
}

// A velocity QP filtered by the VFI rows never lets the margins cross the
// boundary, even when the desired motion pushes straight into it.
TEST(ForwardInvariance, PlaneAndPairMarginsStayNonNegative) {
  // two single-axis gantries: m1 drives +x toward m2, m2 drives diagonally
  // down-and-toward m1, into both the floor plane and the pair constraint
  SerialChainModel m1;
  SerialChainModel m2;
  for (int j = 0; j < 8; ++j) {
    m1.joint_types[j] = JointType::revolute;
    m2.joint_types[j] = JointType::revolute;
    m1.limits[j] = {-3.0, 3.0, 5.0};
    m2.limits[j] = {-3.0, 3.0, 5.0};
  }
  m1.joint_types[0] = JointType::prismatic;  // axis +x via base ry = pi/2
  m2.joint_types[0] = JointType::prismatic;  // axis (-1,0,-1)/sqrt2 via ry = -3pi/4
  m1.base_pose = {-0.5, 0.0, 0.25, 0.0, M_PI / 2, 0.0};
  m2.base_pose = {0.5, 0.0, 0.25, 0.0, -0.75 * M_PI, 0.0};

  const Vector44 a1 = m1.nominal_parameters();
  const Vector44 a2 = m2.nominal_parameters();
  Vector8 q1 = Vector8::Zero();
  Vector8 q2 = Vector8::Zero();

  CollisionGeometry geom;
  geom.plane_pairs.push_back({{1, 8, Vec3::Zero()}, {Vec3(0, 0, 1), 0.0}, 0.05});
  geom.robot_pairs.push_back({{0, 8, Vec3::Zero()}, {1, 8, Vec3::Zero()}, 0.25});
  geom.eta_d = 2.0;

  // sanity: strictly feasible start
  {
    const auto pa = point_kinematics(m1, q1, a1, 8, Vec3::Zero());
    const auto pb = point_kinematics(m2, q2, a2, 8, Vec3::Zero());
    ASSERT_GT(vec3(pb.point, 1e-9).z() - 0.05, 0.1);
    ASSERT_GT((vec3(pa.point, 1e-9) - vec3(pb.point, 1e-9)).norm() - 0.25, 0.5);
  }

  const double dt = 1.0 / 32.0;
  double min_margin = 1.0;
  for (int step = 0; step < 1000; ++step) {
    ConstraintSet set(16);
    append_collision_rows(set, m1, q1, a1, m2, q2, a2, geom, false);
    for (auto& row : joint_limit_rows(m1, q1, 4.0, 16, 0)) set.add(row);
    for (auto& row : joint_limit_rows(m2, q2, 4.0, 16, 8)) set.add(row);

    // push both gantries along their axes
    Eigen::VectorXd qdes = Eigen::VectorXd::Zero(16);
    qdes(0) = 1.0;
    qdes(8) = 1.0;
    QpProblem qp;
    qp.H = 2.0 * Eigen::MatrixXd::Identity(16, 16);
    qp.f = -2.0 * qdes;
    qp.A = set.matrix();
    qp.b = set.bounds();
    const auto sol = solve(qp);
    ASSERT_EQ(sol.status, QpStatus::optimal);
    q1 += dt * sol.u.head<8>();
    q2 += dt * sol.u.tail<8>();

    const auto pa = point_kinematics(m1, q1, a1, 8, Vec3::Zero());
    const auto pb = point_kinematics(m2, q2, a2, 8, Vec3::Zero());
    min_margin = std::min(min_margin, vec3(pb.point, 1e-9).z() - 0.05);
    min_margin = std::min(
        min_margin,
        (vec3(pa.point, 1e-9) - vec3(pb.point, 1e-9)).norm() - 0.25);
  }
  EXPECT_GE(min_margin, -1e-6);
  // both constraints were actually reached
  EXPECT_LT(min_margin, 0.02);
}
