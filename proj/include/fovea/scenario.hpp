#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fovea/adaptive.hpp"
#include "fovea/camera.hpp"
#include "fovea/constraints.hpp"
#include "fovea/kinematics.hpp"
#include "fovea/qp.hpp"
#include "fovea/rng.hpp"
#include "fovea/task_controller.hpp"

namespace fovea {

struct TrajectorySpec {
  Vec3 center{0.16, 0.0, 0.02};
  double radius{0.04};    // m
  double period{30.0};    // s
  double duration{60.0};  // s

  void validate() const {
    if (!(radius > 0.0) || !(period > 0.0) || !(duration > 0.0)) {
      throw std::invalid_argument("TrajectorySpec: radius, period, duration must be > 0");
    }
  }
};

struct FovSpec {
  double theta_safe{0.55 * M_PI / 180.0};  // rad
  double sub_width{1150.0};                // px
  double sub_height{750.0};                // px
};

struct NoiseSpec {
  double pixel_sigma{0.25};  // px
  bool quantize{true};
};

// Zero-mean uniform parameter perturbation, per arm and parameter class.
struct PerturbationSpec {
  double r1_length{5e-4};                  // m
  double r1_angle{0.25 * M_PI / 180.0};    // rad
  double r2_length{2e-3};
  double r2_angle{0.6 * M_PI / 180.0};
};

struct ScenarioConfig {
  SerialChainModel robot1;
  SerialChainModel robot2;
  Vector8 q1_init{Vector8::Zero()};
  Vector8 q2_init{Vector8::Zero()};
  PinholeIntrinsics intrinsics;
  TaskGains task_gains;
  double adapt_eta{7.0};
  double adapt_damping{0.05};
  double adapt_bounds_gain{4.0};
  double adapt_fov_margin_rate{2e-5};
  double adapt_focal_margin_rate{5e-4};
  double eta_joint{4.0};
  TrajectorySpec trajectory;
  FovSpec fov;
  CollisionGeometry collision;
  double d_image{0.405};
  double focal_band{0.005};
  PerturbationSpec perturbation;
  NoiseSpec noise;
  double tick_rate{32.0};
  std::uint64_t seed{1};
  bool adaptive{true};
  int qp_failure_budget{64};
  bool trace_dump_parameters{false};

  void validate() const {
    robot1.validate();
    robot2.validate();
    intrinsics.validate();
    task_gains.validate();
    trajectory.validate();
    collision.validate();
    if (!(tick_rate > 0.0)) throw std::invalid_argument("tick_rate must be > 0");
    if (!(focal_band > 0.0)) throw std::invalid_argument("focal_band must be > 0");
  }
};

// Desired tool position on the horizontal circle; closure at t = period.
inline Quaternion circle_trajectory(double t, const TrajectorySpec& traj) {
  const double phase = 2.0 * M_PI * t / traj.period;
  return Quaternion::pure(traj.center +
                          traj.radius * Vec3(std::cos(phase), std::sin(phase), 0.0));
}

struct TraceRecord {
  int tick{0};
  double time{0.0};
  Vector16 q{Vector16::Zero()};
  std::uint64_t param_hash{0};
  double t1_err{0.0};
  double r1_err{0.0};
  double t2_err{0.0};
  bool pixel_valid{false};
  double pixel_u{0.0};
  double pixel_v{0.0};
  double y_err{0.0};  // meaningful only when pixel_valid
  double g_fov_true{0.0};
  double g_fov_est{0.0};
  bool in_real_fov{false};
  bool in_est_fov{false};
  std::uint32_t active_constraints{0};
  QpStatus task_status{QpStatus::optimal};
  // adaptation gating: skipped ticks have no QP status
  bool adapt_ran{false};
  QpStatus adapt_status{QpStatus::optimal};
  double lyapunov_rate{0.0};  // x~' J_{x,a} u_a of the applied update
  Vector88 parameters{Vector88::Zero()};  // dumped only when configured
};

struct ScenarioSummary {
  std::uint64_t seed{0};
  bool adaptive{false};
  int ticks{0};
  int adaptation_ticks{0};
  int task_qp_failures{0};
  int adapt_qp_failures{0};
  double duty_ratio{0.0};
  double duty_ratio_estimated{0.0};
  double max_deviation_deg{0.0};
  double min_estimated_margin{0.0};
  double mean_line_error_last_quarter{0.0};
  double final_param_error_length{0.0};
  double final_param_error_angle{0.0};
};

struct ScenarioResult {
  std::vector<TraceRecord> trace;
  ScenarioSummary summary;
};

struct InfeasibleInitialization : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t fnv1a(const double* data, int count) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  for (int i = 0; i < count * 8; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline Vector44 perturb_arm(const Vector44& nominal, double length_mag,
                            double angle_mag, Rng& rng) {
  Vector44 out = nominal;
  for (int c = 0; c < 44; ++c) {
    const double mag = is_angular_parameter(c) ? angle_mag : length_mag;
    out(c) += rng.uniform(-mag, mag);
  }
  return out;
}

struct TickStates {
  KinematicState s1;
  KinematicState s2;
};

inline TickStates evaluate(const ScenarioConfig& cfg, const Vector16& q,
                           const Vector88& a) {
  return {forward_kinematics(cfg.robot1, q.head<8>(), a.head<44>()),
          forward_kinematics(cfg.robot2, q.tail<8>(), a.tail<44>())};
}

// All velocity-space rows for one tick, from the controller's estimated view.
inline ConstraintSet velocity_rows(const ScenarioConfig& cfg, const Vector16& q,
                                   const Vector88& a, const TickStates& st) {
  ConstraintSet set(16);
  for (auto& row : joint_limit_rows(cfg.robot1, q.head<8>(), cfg.eta_joint, 16, 0))
    set.add(std::move(row));
  for (auto& row : joint_limit_rows(cfg.robot2, q.tail<8>(), cfg.eta_joint, 16, 8))
    set.add(std::move(row));
  append_collision_rows(set, cfg.robot1, q.head<8>(), a.head<44>(), cfg.robot2,
                        q.tail<8>(), a.tail<44>(), cfg.collision, false);
  set.add(fov_cone_row(st.s2.rotation, embed_arm_block(st.s2.Jr_q, 1, false),
                       st.s1.translation, embed_arm_block(st.s1.Jt_q, 0, false),
                       st.s2.translation, embed_arm_block(st.s2.Jt_q, 1, false),
                       cfg.fov.theta_safe, cfg.collision.eta_d,
                       cfg.collision.eta_recover));
  auto focal = focal_band_rows(
      st.s1.translation, embed_arm_block(st.s1.Jt_q, 0, false),
      st.s2.translation, embed_arm_block(st.s2.Jt_q, 1, false), cfg.d_image,
      cfg.focal_band, cfg.collision.eta_d, cfg.collision.eta_recover);
  set.add(std::move(focal[0]));
  set.add(std::move(focal[1]));
  return set;
}

// Parameter-space mirrors of the collision and FoV/focal families (B_a rows).
// The FoV/focal mirrors carry a rate floor: on the boundary the estimate may
// still tighten those margins at a bounded rate (the velocity-space recovery
// gain keeps the logged margin within its numerical band).
inline ConstraintSet parameter_rows(const ScenarioConfig& cfg, const Vector16& q,
                                    const Vector88& a, const TickStates& st,
                                    const AdaptationGains& gains) {
  ConstraintSet set(88);
  append_collision_rows(set, cfg.robot1, q.head<8>(), a.head<44>(), cfg.robot2,
                        q.tail<8>(), a.tail<44>(), cfg.collision, true);
  auto fov = fov_cone_row(st.s2.rotation, embed_arm_block(st.s2.Jr_a, 1, true),
                          st.s1.translation, embed_arm_block(st.s1.Jt_a, 0, true),
                          st.s2.translation, embed_arm_block(st.s2.Jt_a, 1, true),
                          cfg.fov.theta_safe, cfg.collision.eta_d);
  if (fov) {
    fov->bound = std::max(fov->bound, gains.fov_margin_rate);
    set.add(std::move(*fov));
  }
  auto focal = focal_band_rows(
      st.s1.translation, embed_arm_block(st.s1.Jt_a, 0, true), st.s2.translation,
      embed_arm_block(st.s2.Jt_a, 1, true), cfg.d_image, cfg.focal_band,
      cfg.collision.eta_d);
  focal[0].bound = std::max(focal[0].bound, gains.focal_margin_rate);
  focal[1].bound = std::max(focal[1].bound, gains.focal_margin_rate);
  set.add(std::move(focal[0]));
  set.add(std::move(focal[1]));
  return set;
}

inline double cone_angle(const Quaternion& r2, const Quaternion& t1,
                         const Quaternion& t2) {
  const Quaternion axis = adjoint(r2, {0.0, 0.0, 0.0, -1.0});
  const Quaternion l = estimated_line_direction(t1, t2);
  return std::acos(std::clamp(dot(axis, l), -1.0, 1.0));
}

}  // namespace detail

// Closed-loop experiment: the plant runs the perturbed true model, the
// controller and estimator see only the nominal/adapted parameters.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const double dt = 1.0 / cfg.tick_rate;
  const int n_ticks =
      static_cast<int>(std::lround(cfg.trajectory.duration * cfg.tick_rate));

  Rng rng(cfg.seed);
  Vector88 a_true;
  a_true.head<44>() = detail::perturb_arm(cfg.robot1.nominal_parameters(),
                                          cfg.perturbation.r1_length,
                                          cfg.perturbation.r1_angle, rng);
  a_true.tail<44>() = detail::perturb_arm(cfg.robot2.nominal_parameters(),
                                          cfg.perturbation.r2_length,
                                          cfg.perturbation.r2_angle, rng);
  Vector88 a_hat;
  a_hat.head<44>() = cfg.robot1.nominal_parameters();
  a_hat.tail<44>() = cfg.robot2.nominal_parameters();

  AdaptationGains adapt_gains = default_adaptation_gains(a_hat);
  adapt_gains.eta_a = cfg.adapt_eta;
  adapt_gains.damping.setConstant(cfg.adapt_damping);
  adapt_gains.bounds_gain = cfg.adapt_bounds_gain;
  adapt_gains.fov_margin_rate = cfg.adapt_fov_margin_rate;
  adapt_gains.focal_margin_rate = cfg.adapt_focal_margin_rate;

  Vector16 q;
  q << cfg.q1_init, cfg.q2_init;

  // fixed targets: tool orientation and neutral camera position from the
  // nominal model at the initial configuration
  const auto init_states = detail::evaluate(cfg, q, a_hat);
  TaskTargets targets;
  targets.r1_d = init_states.s1.rotation;
  targets.t2_d = init_states.s2.translation;
  targets.t1_d = circle_trajectory(0.0, cfg.trajectory);

  // --- feasibility gate -----------------------------------------------------
  {
    const auto rows = detail::velocity_rows(cfg, q, a_hat, init_states);
    for (const auto& row : rows.rows) {
      if (row.bound < 0.0) {
        throw InfeasibleInitialization(
            "initial configuration violates an estimated-model constraint "
            "(kind " + std::to_string(static_cast<int>(row.kind)) + ")");
      }
    }
    ConstraintSet true_rows(16);
    append_collision_rows(true_rows, cfg.robot1, q.head<8>(), a_true.head<44>(),
                          cfg.robot2, q.tail<8>(), a_true.tail<44>(),
                          cfg.collision, false);
    for (const auto& row : true_rows.rows) {
      if (row.bound < 0.0) {
        throw InfeasibleInitialization(
            "initial configuration violates a true-model collision constraint");
      }
    }
    const auto s1_true = forward_kinematics(cfg.robot1, q.head<8>(), a_true.head<44>());
    const auto s2_true = forward_kinematics(cfg.robot2, q.tail<8>(), a_true.tail<44>());
    const auto px =
        project_point(cfg.intrinsics, s2_true.pose, s1_true.translation);
    if (px.behind_camera || !in_image(cfg.intrinsics, px.u, px.v)) {
      throw InfeasibleInitialization(
          "true tool tip does not project into the camera image at the initial "
          "configuration; reduce the perturbation or re-aim the camera");
    }
    const double start_offset =
        (vec3(init_states.s1.translation, 1e-9) -
         vec3(circle_trajectory(0.0, cfg.trajectory), 1e-9))
            .norm();
    if (start_offset > 0.02) {
      throw InfeasibleInitialization(
          "initial tool position is far from the trajectory start (" +
          std::to_string(start_offset) + " m)");
    }
  }

  ScenarioResult result;
  result.trace.reserve(n_ticks);
  ScenarioSummary& sum = result.summary;
  sum.seed = cfg.seed;
  sum.adaptive = cfg.adaptive;
  sum.ticks = n_ticks;
  sum.min_estimated_margin = std::numeric_limits<double>::infinity();

  QpOptions task_opts;
  QpOptions adapt_opts;
  double line_err_accum = 0.0;
  int line_err_count = 0;
  const int last_quarter_start = (3 * n_ticks) / 4;

  for (int tick = 0; tick < n_ticks; ++tick) {
    const double t = tick * dt;
    targets.t1_d = circle_trajectory(t, cfg.trajectory);

    const auto st = detail::evaluate(cfg, q, a_hat);
    const auto s1_true = forward_kinematics(cfg.robot1, q.head<8>(), a_true.head<44>());
    const auto s2_true = forward_kinematics(cfg.robot2, q.tail<8>(), a_true.tail<44>());

    TraceRecord rec;
    rec.tick = tick;
    rec.time = t;
    rec.q = q;
    rec.param_hash = detail::fnv1a(a_hat.data(), 88);
    if (cfg.trace_dump_parameters) rec.parameters = a_hat;

    const auto err = task_errors(st.s1, st.s2, targets);
    rec.t1_err = err.t1_tilde.norm();
    rec.r1_err = err.r1_tilde.norm();
    rec.t2_err = err.t2_tilde.norm();

    // plant-side measurement
    const auto px_true =
        project_point(cfg.intrinsics, s2_true.pose, s1_true.translation);
    const bool visible =
        !px_true.behind_camera && in_image(cfg.intrinsics, px_true.u, px_true.v);
    rec.in_real_fov = !px_true.behind_camera &&
                      in_subregion(px_true.u, px_true.v, cfg.fov.sub_width,
                                   cfg.fov.sub_height);
    rec.g_fov_true = fov_cone_margin(s2_true.rotation, s1_true.translation,
                                     s2_true.translation, cfg.fov.theta_safe);
    const double theta_true =
        detail::cone_angle(s2_true.rotation, s1_true.translation,
                           s2_true.translation);
    sum.max_deviation_deg =
        std::max(sum.max_deviation_deg,
                 std::max(theta_true - cfg.fov.theta_safe, 0.0) * 180.0 / M_PI);

    std::optional<Quaternion> measurement;
    if (visible) {
      double u_px = px_true.u;
      double v_px = px_true.v;
      if (cfg.noise.pixel_sigma > 0.0) {
        u_px += rng.gaussian(0.0, cfg.noise.pixel_sigma);
        v_px += rng.gaussian(0.0, cfg.noise.pixel_sigma);
      }
      if (cfg.noise.quantize) {
        u_px = std::round(u_px);
        v_px = std::round(v_px);
      }
      rec.pixel_valid = true;
      rec.pixel_u = u_px;
      rec.pixel_v = v_px;
      measurement = measure_line_direction(cfg.intrinsics, u_px, v_px);
    }

    // estimated-view bookkeeping
    rec.g_fov_est = fov_cone_margin(st.s2.rotation, st.s1.translation,
                                    st.s2.translation, cfg.fov.theta_safe);
    {
      const auto px_est =
          project_point(cfg.intrinsics, st.s2.pose, st.s1.translation);
      rec.in_est_fov = !px_est.behind_camera &&
                       in_subregion(px_est.u, px_est.v, cfg.fov.sub_width,
                                    cfg.fov.sub_height);
    }

    // control step
    const auto rows = detail::velocity_rows(cfg, q, a_hat, st);
    const auto control = control_tick(st.s1, st.s2, targets, cfg.task_gains,
                                      rows, task_opts);
    rec.task_status = control.status;
    if (control.status != QpStatus::optimal) {
      ++sum.task_qp_failures;
    } else {
      task_opts.warm_start = control.u;
      sum.min_estimated_margin =
          std::min(sum.min_estimated_margin, rec.g_fov_est);
      const Eigen::VectorXd slack =
          rows.bounds() - rows.matrix() * Eigen::VectorXd(control.u);
      for (std::size_t i = 0; i < rows.rows.size(); ++i) {
        if (slack(i) <= 1e-9 * (1.0 + std::abs(rows.rows[i].bound))) {
          rec.active_constraints |= kind_bit(rows.rows[i].kind);
        }
      }
    }

    // adaptation step (gated on a fresh measurement)
    if (cfg.adaptive && measurement) {
      const auto prows = detail::parameter_rows(cfg, q, a_hat, st, adapt_gains);
      const auto adapt =
          adapt_tick(st.s1, st.s2, a_hat, *measurement, err, targets.r1_d,
                     cfg.task_gains, adapt_gains, prows, adapt_opts);
      rec.adapt_ran = true;
      rec.adapt_status = adapt.status;
      rec.y_err = adapt.error.norm();
      if (adapt.status == QpStatus::optimal) {
        adapt_opts.warm_start = adapt.u;
        rec.lyapunov_rate =
            lyapunov_row(st.s1, st.s2, err, targets.r1_d, cfg.task_gains)
                .dot(adapt.u);
        a_hat += dt * adapt.u;
      } else {
        ++sum.adapt_qp_failures;
      }
      ++sum.adaptation_ticks;
      if (tick >= last_quarter_start) {
        line_err_accum += adapt.error.norm();
        ++line_err_count;
      }
    } else if (measurement) {
      // adaptation off: still log the line-direction residual
      const Quaternion y_hat = to_optical_frame(
          st.s2.rotation,
          estimated_line_direction(st.s1.translation, st.s2.translation));
      rec.y_err = measurement_error(y_hat, *measurement).norm();
      if (tick >= last_quarter_start) {
        line_err_accum += rec.y_err;
        ++line_err_count;
      }
    }

    q += dt * control.u;
    result.trace.push_back(std::move(rec));
  }

  int in_fov = 0;
  int in_est = 0;
  for (const auto& r : result.trace) {
    in_fov += r.in_real_fov ? 1 : 0;
    in_est += r.in_est_fov ? 1 : 0;
  }
  sum.duty_ratio = n_ticks > 0 ? static_cast<double>(in_fov) / n_ticks : 0.0;
  sum.duty_ratio_estimated =
      n_ticks > 0 ? static_cast<double>(in_est) / n_ticks : 0.0;
  sum.mean_line_error_last_quarter =
      line_err_count > 0 ? line_err_accum / line_err_count : 0.0;

  const Vector88 diff = a_hat - a_true;
  double len2 = 0.0;
  double ang2 = 0.0;
  for (int c = 0; c < 88; ++c) {
    if (is_angular_parameter(c % 44)) {
      ang2 += diff(c) * diff(c);
    } else {
      len2 += diff(c) * diff(c);
    }
  }
  sum.final_param_error_length = std::sqrt(len2);
  sum.final_param_error_angle = std::sqrt(ang2);
  return result;
}

}  // namespace fovea
