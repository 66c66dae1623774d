// Acceptance suite: runs every headline requirement at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code 0 iff all pass.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "fovea/adaptive.hpp"
#include "fovea/fd_check.hpp"
#include "fovea/scenario.hpp"
#include "fovea/scenario_config.hpp"
#include "fovea/trace_io.hpp"
#include "support/frozen_pose.hpp"
#include "support/qp_reference.hpp"
#include "support/test_models.hpp"

using namespace fovea;
namespace ts = fovea::testsupport;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s  --  %s\n", pass ? "PASS" : "FAIL",
              criterion, name, detail.c_str());
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// --- 1: algebra identities ----------------------------------------------------

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Quaternion a = ts::random_quaternion(rng);
    const Quaternion b = ts::random_quaternion(rng);
    const Vec4 prod = vec4(a * b);
    worst = std::max(worst,
                     (hamilton_plus4(a) * vec4(b) - prod).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (hamilton_minus4(b) * vec4(a) - prod).cwiseAbs().maxCoeff());

    const Quaternion r = ts::random_unit_quaternion(rng);
    const Quaternion p = ts::random_pure(rng);
    const Quaternion ad = adjoint(r, p);
    worst = std::max(
        worst, (vec4(ad) - hamilton_plus4(r) * hamilton_minus4(r.conj()) * vec4(p))
                   .cwiseAbs()
                   .maxCoeff());
    worst = std::max(worst, std::abs(ad.w));
    worst = std::max(worst, std::abs(ad.norm() - p.norm()));

    const Quaternion ra = ts::random_unit_quaternion(rng);
    const Quaternion ta = ts::random_pure(rng);
    const Quaternion rb = ts::random_unit_quaternion(rng);
    const Quaternion tb = ts::random_pure(rng);
    const DualQuaternion x = pose_compose(DualQuaternion::from_pose(ra, ta),
                                          DualQuaternion::from_pose(rb, tb));
    const Eigen::Matrix4d oracle =
        ts::homogeneous(ts::rotation_matrix(ra), vec3(ta)) *
        ts::homogeneous(ts::rotation_matrix(rb), vec3(tb));
    const auto [rx, tx] = pose_decompose(x);
    worst = std::max(worst, (ts::rotation_matrix(rx) - oracle.topLeftCorner<3, 3>())
                                .cwiseAbs()
                                .maxCoeff());
    worst = std::max(
        worst, (vec3(tx, 1e-9) - oracle.topRightCorner<3, 1>()).cwiseAbs().maxCoeff());

    const auto [rr, tr] = pose_decompose(DualQuaternion::from_pose(ra, ta));
    worst = std::max(worst, (vec4(rr) - vec4(ra)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (vec4(tr) - vec4(ta)).cwiseAbs().maxCoeff());
  }
  const double dt = seconds_since(t0);
  report(1, "algebra suite", worst < 1e-10 && dt < 5.0,
         fmt("10^4 cases, worst residual %.2e (tol 1e-10), %.2f s (< 5 s)",
             worst, dt));
}

// --- 2: jacobian oracles --------------------------------------------------------

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(102);

  double worst_fk = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto m = ts::random_model(rng);
    worst_fk = std::max(worst_fk,
                        jacobians_fd_check(m, ts::random_q(rng),
                                           ts::random_parameters(rng), 1e-6));
  }

  double worst_line = 0.0;
  double worst_adapt = 0.0;
  double worst_vfi = 0.0;
  int done = 0;
  while (done < 100) {
    SerialChainModel m1 = ts::random_model(rng);
    SerialChainModel m2 = ts::random_model(rng);
    const Vector8 q1 = ts::random_q(rng);
    const Vector8 q2 = ts::random_q(rng);
    Vector88 a;
    a.head<44>() = ts::random_parameters(rng);
    a.tail<44>() = ts::random_parameters(rng);
    const auto s1 = forward_kinematics(m1, q1, Vector44(a.head<44>()));
    const auto s2 = forward_kinematics(m2, q2, Vector44(a.tail<44>()));
    if ((s1.translation - s2.translation).norm() < 0.05) continue;

    const auto line_fd = central_difference_jacobian(
        [&](const Eigen::VectorXd& av) -> Eigen::VectorXd {
          const auto w1 = forward_kinematics(m1, q1, Vector44(av.head(44)));
          const auto w2 = forward_kinematics(m2, q2, Vector44(av.tail(44)));
          return vec4(estimated_line_direction(w1.translation, w2.translation));
        },
        a, 1e-6);
    worst_line = std::max(
        worst_line,
        max_relative_error(line_direction_param_jacobian(s1, s2), line_fd));

    const auto adapt_fd = central_difference_jacobian(
        [&](const Eigen::VectorXd& av) -> Eigen::VectorXd {
          const auto w1 = forward_kinematics(m1, q1, Vector44(av.head(44)));
          const auto w2 = forward_kinematics(m2, q2, Vector44(av.tail(44)));
          return vec4(to_optical_frame(
              w2.rotation,
              estimated_line_direction(w1.translation, w2.translation)));
        },
        a, 1e-6);
    worst_adapt = std::max(
        worst_adapt, max_relative_error(adaptation_jacobian(s1, s2), adapt_fd));

    // one VFI row of each family per state
    const double theta_safe = 0.2;
    const auto fov_q = fov_cone_row(
        s2.rotation, embed_arm_block(s2.Jr_q, 1, false), s1.translation,
        embed_arm_block(s1.Jt_q, 0, false), s2.translation,
        embed_arm_block(s2.Jt_q, 1, false), theta_safe, 2.0);
    if (fov_q) {
      Eigen::VectorXd q16(16);
      q16 << q1, q2;
      const auto fd = central_difference_jacobian(
          [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
            const auto w1 = forward_kinematics(m1, Vector8(qv.head(8)),
                                               Vector44(a.head<44>()));
            const auto w2 = forward_kinematics(m2, Vector8(qv.tail(8)),
                                               Vector44(a.tail<44>()));
            Eigen::VectorXd out(1);
            out(0) = fov_cone_margin(w2.rotation, w1.translation,
                                     w2.translation, theta_safe);
            return out;
          },
          q16, 1e-6);
      worst_vfi = std::max(worst_vfi, max_relative_error(-fov_q->coeffs, fd));
    }

    const auto pa = point_kinematics(m1, q1, Vector44(a.head<44>()), 8,
                                     Vec3(0.1, -0.05, 0.2));
    const auto pb = point_kinematics(m2, q2, Vector44(a.tail<44>()), 7,
                                     Vec3(-0.1, 0.15, 0.0));
    if ((vec3(pa.point, 1e-9) - vec3(pb.point, 1e-9)).norm() > 0.05) {
      const auto row = point_point_row(
          vec3(pa.point, 1e-9), embed_arm_block(pa.Jp_q, 0, false),
          vec3(pb.point, 1e-9), embed_arm_block(pb.Jp_q, 1, false), 0.1, 2.0,
          ZoneDirection::keep_out);
      Eigen::VectorXd q16(16);
      q16 << q1, q2;
      const auto fd = central_difference_jacobian(
          [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
            const auto wa = point_kinematics(m1, Vector8(qv.head(8)),
                                             Vector44(a.head<44>()), 8,
                                             Vec3(0.1, -0.05, 0.2));
            const auto wb = point_kinematics(m2, Vector8(qv.tail(8)),
                                             Vector44(a.tail<44>()), 7,
                                             Vec3(-0.1, 0.15, 0.0));
            Eigen::VectorXd out(1);
            out(0) = (vec3(wa.point, 1e-9) - vec3(wb.point, 1e-9)).norm();
            return out;
          },
          q16, 1e-6);
      worst_vfi = std::max(worst_vfi, max_relative_error(-row->coeffs, fd));
    }

    const Plane plane{Vec3(0.2, -0.3, 0.933).normalized(), -0.3};
    const auto prow = point_plane_row(vec3(pa.point, 1e-9),
                                      Eigen::MatrixXd(pa.Jp_q), plane, 0.05, 2.0);
    const auto pfd = central_difference_jacobian(
        [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
          const auto w = point_kinematics(m1, Vector8(qv), Vector44(a.head<44>()),
                                          8, Vec3(0.1, -0.05, 0.2));
          Eigen::VectorXd out(1);
          out(0) = plane.normal.dot(vec3(w.point, 1e-9)) - plane.offset;
          return out;
        },
        q1, 1e-6);
    worst_vfi = std::max(worst_vfi, max_relative_error(-prow.coeffs, pfd));

    const auto line = PluckerLine::through_point(
        Quaternion::pure(Vec3(0.3, -0.2, 0.933).normalized()),
        Quaternion::pure({0.1, 0.2, 0.0}));
    const auto lrow = point_line_row(vec3(pa.point, 1e-9),
                                     Eigen::MatrixXd(pa.Jp_q), line, 0.05, 2.0);
    if (lrow) {
      const auto lfd = central_difference_jacobian(
          [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
            const auto w = point_kinematics(m1, Vector8(qv),
                                            Vector44(a.head<44>()), 8,
                                            Vec3(0.1, -0.05, 0.2));
            const Vec3 pl = vec3(line.direction);
            const Vec3 mo = vec3(line.moment, 1e-9);
            Eigen::VectorXd out(1);
            out(0) = (vec3(w.point, 1e-9).cross(pl) - mo).norm();
            return out;
          },
          q1, 1e-6);
      worst_vfi = std::max(worst_vfi, max_relative_error(-lrow->coeffs, lfd));
    }

    const auto focal = focal_band_rows(
        s1.translation, embed_arm_block(s1.Jt_q, 0, false), s2.translation,
        embed_arm_block(s2.Jt_q, 1, false), 0.3, 0.01, 2.0);
    Eigen::VectorXd q16(16);
    q16 << q1, q2;
    const auto ffd = central_difference_jacobian(
        [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
          const auto w1 = forward_kinematics(m1, Vector8(qv.head(8)),
                                             Vector44(a.head<44>()));
          const auto w2 = forward_kinematics(m2, Vector8(qv.tail(8)),
                                             Vector44(a.tail<44>()));
          Eigen::VectorXd out(1);
          out(0) = (w1.translation - w2.translation).norm();
          return out;
        },
        q16, 1e-6);
    worst_vfi = std::max(worst_vfi, max_relative_error(-focal[0].coeffs, ffd));
    ++done;
  }

  const double dt = seconds_since(t0);
  const double worst =
      std::max(std::max(worst_fk, worst_line), std::max(worst_adapt, worst_vfi));
  report(2, "jacobian oracle suite", worst < 1e-5 && dt < 30.0,
         fmt("FK %.1e, line %.1e, adaptation %.1e, VFI %.1e (tol 1e-5), %.1f s "
             "(< 30 s)",
             worst_fk, worst_line, worst_adapt, worst_vfi, dt));
}

// --- 3: projector -------------------------------------------------------------

void criterion3() {
  const auto fx = ts::make_frozen_pose_setup(2.0 * M_PI / 180.0, 2e-3);
  Vector88 a_hat = fx.a_nom;
  auto gains = default_adaptation_gains(fx.a_nom);
  gains.eta_a = 32.0;
  gains.damping.setConstant(0.01);
  const double dt = 1.0 / 32.0;
  Rng rng(103);

  // Estimator outputs carry no tool-arm content (those directions cannot
  // change the measurement on the feasible set), so their t1 displacement is
  // identically zero and satisfies the second-order bound trivially; the
  // slope ratio is exercised on random directions projected onto the same
  // null space the outputs are confined to.
  double worst_nu = 0.0;
  bool bound_ok = true;
  double worst_slope_dev = 0.0;
  int slope_samples = 0;
  for (int tick = 0; tick < 300; ++tick) {
    const int k = tick % 5;
    const auto s1 = fx.state1(k, a_hat);
    const auto s2 = fx.state2(k, a_hat);
    TaskTargets targets{s1.rotation, s1.translation, s2.translation};
    const auto err = task_errors(s1, s2, targets);
    const auto res = adapt_tick(s1, s2, a_hat, fx.measure(k), err, targets.r1_d,
                                TaskGains{}, gains, ConstraintSet(88));
    if (res.status != QpStatus::optimal) {
      report(3, "projector suite", false, "adaptation QP failed");
      return;
    }
    const Matrix5x88 n = projector_rows(s1, s2);
    worst_nu = std::max(worst_nu, (n * res.u).cwiseAbs().maxCoeff());

    const Vec3 t1_0 = vec3(s1.translation, 1e-9);
    const auto displacement = [&](const Vector88& dir, double eps) {
      const Vector88 ap = a_hat + eps * dir;
      const auto w1 = forward_kinematics(fx.cfg.robot1, fx.viewpoints[k].first,
                                         Vector44(ap.head<44>()));
      return (vec3(w1.translation, 1e-9) - t1_0).norm();
    };

    if (res.u.norm() > 1e-6) {
      for (const double eps : {1e-3, 1e-4}) {
        const double budget =
            10.0 * eps * eps * std::max(1.0, res.u.squaredNorm());
        if (displacement(res.u, eps) > budget) bound_ok = false;
      }
    }

    if (tick % 25 == 0) {
      Vector88 raw;
      for (int c = 0; c < 88; ++c) raw(c) = rng.uniform(-1.0, 1.0);
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(n, Eigen::ComputeFullV);
      const Eigen::MatrixXd v_null = svd.matrixV().rightCols(88 - 5);
      Vector88 dir = v_null * (v_null.transpose() * raw);
      dir /= dir.norm();
      const double d3 = displacement(dir, 1e-3);
      const double d4 = displacement(dir, 1e-4);
      if (d4 > 1e-13) {
        worst_slope_dev =
            std::max(worst_slope_dev, std::abs(std::log10(d3 / d4) - 2.0));
        ++slope_samples;
      }
    }
    a_hat += dt * res.u;
  }
  report(3, "projector suite",
         worst_nu < 1e-8 && bound_ok && worst_slope_dev <= 0.2 &&
             slope_samples >= 10,
         fmt("max |N u| = %.2e (tol 1e-8), output displacement bound %s, "
             "null-space slope dev %.3f over %d samples (tol 0.2)",
             worst_nu, bound_ok ? "held" : "VIOLATED", worst_slope_dev,
             slope_samples));
}

// --- 4: Lyapunov constraint over a full scenario --------------------------------

void criterion4() {
  ScenarioConfig cfg = default_scenario_config();
  const auto result = run_scenario(cfg);
  double worst = -std::numeric_limits<double>::infinity();
  int count = 0;
  for (const auto& r : result.trace) {
    if (r.adapt_ran && r.adapt_status == QpStatus::optimal) {
      worst = std::max(worst, r.lyapunov_rate);
      ++count;
    }
  }
  report(4, "Lyapunov suite", worst <= 1e-9 && count > 1000,
         fmt("max x~' J u over %d adaptation ticks = %.2e (tol 1e-9)", count,
             worst));
}

// --- 5: QP vs projected-gradient oracle -----------------------------------------

void criterion5() {
  Rng rng(105);
  double worst_kkt = 0.0;
  double worst_gap = 0.0;
  bool all_optimal = true;
  for (int trial = 0; trial < 200; ++trial) {
    const QpProblem qp = ts::random_feasible_qp(rng);
    const auto sol = solve(qp);
    if (sol.status != QpStatus::optimal) {
      all_optimal = false;
      break;
    }
    worst_kkt = std::max(worst_kkt, sol.kkt_residual);
    const Eigen::VectorXd ref = ts::projected_gradient_reference(qp);
    const double scale = 1.0 + std::abs(ts::qp_objective(qp, ref));
    worst_gap = std::max(
        worst_gap,
        std::abs(ts::qp_objective(qp, sol.u) - ts::qp_objective(qp, ref)) / scale);
  }
  report(5, "QP suite", all_optimal && worst_kkt < 1e-6 && worst_gap < 1e-6,
         fmt("200 problems, worst KKT %.2e, worst objective gap %.2e (tol 1e-6)",
             worst_kkt, worst_gap));
}

// --- 6: frozen-pose calibration --------------------------------------------------

void criterion6() {
  const auto fx = ts::make_frozen_pose_setup(2.0 * M_PI / 180.0, 2e-3);
  Vector88 a_hat = fx.a_nom;
  auto gains = default_adaptation_gains(fx.a_nom);
  gains.eta_a = 32.0;  // full-projection calibration gain, noise-free
  gains.damping.setConstant(0.01);
  const double dt = 1.0 / 32.0;
  for (int tick = 0; tick < 2000; ++tick) {
    const int k = tick % 5;
    const auto s1 = fx.state1(k, a_hat);
    const auto s2 = fx.state2(k, a_hat);
    TaskTargets targets{s1.rotation, s1.translation, s2.translation};
    const auto err = task_errors(s1, s2, targets);
    const auto res = adapt_tick(s1, s2, a_hat, fx.measure(k), err, targets.r1_d,
                                TaskGains{}, gains, ConstraintSet(88));
    if (res.status != QpStatus::optimal) {
      report(6, "frozen-pose calibration", false, "adaptation QP failed");
      return;
    }
    a_hat += dt * res.u;
  }
  double final_residual = 0.0;
  for (int k = 0; k < 5; ++k) {
    const auto s1 = fx.state1(k, a_hat);
    const auto s2 = fx.state2(k, a_hat);
    const Quaternion y_hat = to_optical_frame(
        s2.rotation, estimated_line_direction(s1.translation, s2.translation));
    final_residual =
        std::max(final_residual, measurement_error(y_hat, fx.measure(k)).norm());
  }
  report(6, "frozen-pose calibration", final_residual < 1e-3,
         fmt("2 deg + 2 mm injected, final |y~| = %.2e after 2000 ticks "
             "(tol 1e-3)",
             final_residual));
}

// --- 7: headline experiment ------------------------------------------------------

void criterion7() {
  ScenarioConfig cfg = default_scenario_config();
  const auto t0 = std::chrono::steady_clock::now();
  cfg.adaptive = true;
  const auto on = run_scenario(cfg);
  const double t_on = seconds_since(t0);
  const auto t1 = std::chrono::steady_clock::now();
  cfg.adaptive = false;
  const auto off = run_scenario(cfg);
  const double t_off = seconds_since(t1);

  const bool duty_ok = on.summary.duty_ratio >= 0.9;
  const bool gap_ok = off.summary.duty_ratio <= on.summary.duty_ratio - 0.2;
  const bool margin_ok = on.summary.min_estimated_margin >= -1e-6 &&
                         off.summary.min_estimated_margin >= -1e-6;
  const bool time_ok = t_on < 60.0 && t_off < 60.0;
  report(7, "headline experiment",
         duty_ok && gap_ok && margin_ok && time_ok,
         fmt("adaptive %.1f%% vs fixed %.1f%% (need >= 90 and 20 point gap), "
             "min g: %.1e / %.1e (>= -1e-6), runtimes %.1f s / %.1f s (< 60 s)",
             100 * on.summary.duty_ratio, 100 * off.summary.duty_ratio,
             on.summary.min_estimated_margin, off.summary.min_estimated_margin,
             t_on, t_off));
}

// --- 8: determinism ---------------------------------------------------------------

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion8() {
  ScenarioConfig cfg = default_scenario_config();
  cfg.trajectory.duration = 20.0;
  const auto a = run_scenario(cfg);
  const auto b = run_scenario(cfg);
  const std::string pa = "/tmp/fovea_acceptance_a.csv";
  const std::string pb = "/tmp/fovea_acceptance_b.csv";
  emit_trace(a.trace, pa);
  emit_trace(b.trace, pb);
  const std::string ba = file_bytes(pa);
  const std::string bb = file_bytes(pb);
  const bool same = !ba.empty() && ba == bb;
  report(8, "determinism", same,
         fmt("two runs, identical config and seed: traces %s (%zu bytes)",
             same ? "byte-identical" : "DIFFER", ba.size()));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "OK" : "FAILED",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
