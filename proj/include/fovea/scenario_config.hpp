#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "fovea/scenario.hpp"

namespace fovea {

namespace detail {

struct AimTarget {
  Vec3 position;
  Quaternion axis_local;  // effector-frame axis to align
  Vec3 axis_world;        // unit target direction
};

inline double aim_residual(const SerialChainModel& model, const Vector44& a,
                           const Vector8& q, const AimTarget& target) {
  const auto s = forward_kinematics(model, q, a);
  const Vec3 axis = vec3(adjoint(s.rotation, target.axis_local), 1e-9);
  return (vec3(s.translation, 1e-9) - target.position).norm() +
         (axis - target.axis_world).norm();
}

// Damped least squares onto a position + pointing target; used only to bake
// the default initial configuration.
inline double aim_arm(const SerialChainModel& model, const Vector44& a,
                      Vector8& q, const AimTarget& target, int iterations,
                      double damping) {
  for (int it = 0; it < iterations; ++it) {
    const auto s = forward_kinematics(model, q, a);
    Eigen::Matrix<double, 6, 1> f;
    f.head<3>() = vec3(s.translation, 1e-9) - target.position;
    f.tail<3>() =
        vec3(adjoint(s.rotation, target.axis_local), 1e-9) - target.axis_world;
    Eigen::Matrix<double, 6, 8> jac;
    jac.topRows<3>() = s.Jt_q.bottomRows<3>();
    jac.bottomRows<3>() =
        (adjoint_jacobian_wrt_rotation(s.rotation, target.axis_local) * s.Jr_q)
            .bottomRows<3>();
    const Eigen::Matrix<double, 8, 8> h =
        jac.transpose() * jac + damping * Eigen::Matrix<double, 8, 8>::Identity();
    q -= h.ldlt().solve(jac.transpose() * f);
    for (int j = 0; j < 8; ++j) {
      // keep the solved configuration strictly inside the joint range
      const double margin = 0.05 * (model.limits[j].q_max - model.limits[j].q_min);
      q(j) = std::clamp(q(j), model.limits[j].q_min + margin,
                        model.limits[j].q_max - margin);
    }
  }
  return aim_residual(model, a, q, target);
}

inline Vector8 solve_aim(const SerialChainModel& model, const Vector44& a,
                         const AimTarget& target, const Vector8& guess,
                         std::uint64_t restart_seed) {
  Rng rng(restart_seed);
  Vector8 best = guess;
  double best_res = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 24; ++attempt) {
    Vector8 q = guess;
    if (attempt > 0) {
      for (int j = 0; j < 8; ++j) q(j) += rng.uniform(-0.8, 0.8);
    }
    aim_arm(model, a, q, target, 80, 1e-3);
    const double res = aim_arm(model, a, q, target, 200, 1e-9);
    if (res < best_res) {
      best_res = res;
      best = q;
    }
    if (best_res < 1e-10) break;
  }
  if (best_res > 1e-8) {
    throw std::runtime_error("solve_aim: no configuration reaches the target, residual " +
                             std::to_string(best_res));
  }
  return best;
}

}  // namespace detail

// One 8-DoF branch of the platform: workspace ring motor, radial rail, and a
// six-axis arm. ring_angle picks the side of the workspace the branch sits on.
inline SerialChainModel default_branch(double ring_angle) {
  SerialChainModel m;
  m.joint_types = {JointType::revolute,  JointType::prismatic, JointType::revolute,
                   JointType::revolute,  JointType::revolute,  JointType::revolute,
                   JointType::revolute,  JointType::revolute};
  m.dh[0] = {ring_angle, 0.20, 0.0, -M_PI / 2};  // ring about the workspace center
  m.dh[1] = {0.0, 0.30, 0.0, M_PI / 2};          // radial rail
  m.dh[2] = {0.0, 0.15, 0.0, M_PI / 2};          // shoulder pan
  m.dh[3] = {0.0, 0.0, 0.30, 0.0};               // upper arm
  m.dh[4] = {0.0, 0.0, 0.25, 0.0};               // forearm
  m.dh[5] = {0.0, 0.0, 0.0, M_PI / 2};           // wrist 1
  m.dh[6] = {0.0, 0.12, 0.0, -M_PI / 2};         // wrist 2
  m.dh[7] = {0.0, 0.10, 0.0, 0.0};               // flange roll
  m.base_pose = {0, 0, 0, 0, 0, 0};
  m.limits[0] = {-M_PI, M_PI, 1.0};
  m.limits[1] = {-0.15, 0.25, 0.5};
  for (int j = 2; j < 8; ++j) m.limits[j] = {-2.9, 2.9, 2.0};
  return m;
}

// The experiment configuration: drill branch on +x, camera branch on -x,
// tool circling above the stage while the camera watches from 45 degrees.
inline ScenarioConfig default_scenario_config() {
  ScenarioConfig cfg;
  cfg.seed = 7;
  cfg.robot1 = default_branch(-M_PI / 2);
  cfg.robot1.effector_pose = {0.0, 0.0, 0.12, 0.0, 0.0, 0.0};  // drill tip
  cfg.robot2 = default_branch(M_PI / 2);
  cfg.robot2.effector_pose = {0.0, 0.0, 0.06, M_PI, 0.0, 0.0};  // optical frame

  cfg.trajectory.center = Vec3(0.16, 0.0, 0.02);
  cfg.trajectory.radius = 0.04;
  cfg.trajectory.period = 30.0;
  cfg.trajectory.duration = 60.0;

  const Vec3 tip_start = cfg.trajectory.center + Vec3(cfg.trajectory.radius, 0, 0);
  const Vec3 view_dir = Vec3(1.0, 0.0, -1.0).normalized();  // camera to tip
  const Vec3 camera_pos = tip_start - cfg.d_image * view_dir;

  detail::AimTarget drill_target{tip_start, Quaternion{0, 0, 0, 1},
                                 Vec3(0, 0, -1)};
  Vector8 guess1 = Vector8::Zero();
  guess1 << 0.0, 0.0, -M_PI / 2, 0.9, 1.5, 0.7, 0.0, 0.0;
  cfg.q1_init = detail::solve_aim(cfg.robot1, cfg.robot1.nominal_parameters(),
                                  drill_target, guess1, 9001);

  detail::AimTarget camera_target{camera_pos, Quaternion{0, 0, 0, -1}, view_dir};
  Vector8 guess2 = Vector8::Zero();
  guess2 << 0.0, 0.0, M_PI / 2, 0.9, 1.5, 0.7, 0.0, 0.0;
  cfg.q2_init = detail::solve_aim(cfg.robot2, cfg.robot2.nominal_parameters(),
                                  camera_target, guess2, 9002);

  // stage top plane and central pedestal
  const Plane stage{Vec3(0, 0, 1), 0.0};
  auto& col = cfg.collision;
  col.eta_d = 2.0;
  col.plane_pairs = {
      {{0, 5, Vec3::Zero()}, stage, 0.05},  // drill elbow
      {{0, 7, Vec3::Zero()}, stage, 0.03},  // drill wrist
      {{0, 8, Vec3::Zero()}, stage, 0.02},  // drill flange
      {{0, 9, Vec3::Zero()}, stage, 0.005}, // drill tip
      {{1, 5, Vec3::Zero()}, stage, 0.05},
      {{1, 7, Vec3::Zero()}, stage, 0.05},
      {{1, 8, Vec3::Zero()}, stage, 0.05},
      {{1, 9, Vec3::Zero()}, stage, 0.05},  // optical center
  };
  col.line_pairs = {
      {{0, 8, Vec3::Zero()}, Vec3::Zero(), Vec3(0, 0, 1), 0.06},
      {{0, 9, Vec3::Zero()}, Vec3::Zero(), Vec3(0, 0, 1), 0.06},
      {{1, 8, Vec3::Zero()}, Vec3::Zero(), Vec3(0, 0, 1), 0.06},
      {{1, 9, Vec3::Zero()}, Vec3::Zero(), Vec3(0, 0, 1), 0.06},
  };
  col.robot_pairs = {
      {{0, 9, Vec3::Zero()}, {1, 9, Vec3::Zero()}, 0.10},
      {{0, 8, Vec3::Zero()}, {1, 9, Vec3::Zero()}, 0.10},
      {{0, 9, Vec3::Zero()}, {1, 8, Vec3::Zero()}, 0.10},
      {{0, 8, Vec3::Zero()}, {1, 8, Vec3::Zero()}, 0.10},
      {{0, 5, Vec3::Zero()}, {1, 5, Vec3::Zero()}, 0.10},
  };
  return cfg;
}

// --- JSON schema -------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json robot_json(const SerialChainModel& m) {
  nlohmann::ordered_json j;
  for (int k = 0; k < 8; ++k) {
    j["joint_types"].push_back(
        m.joint_types[k] == JointType::revolute ? "revolute" : "prismatic");
    j["dh"].push_back({m.dh[k][0], m.dh[k][1], m.dh[k][2], m.dh[k][3]});
    j["limits"].push_back(
        {m.limits[k].q_min, m.limits[k].q_max, m.limits[k].v_max});
  }
  j["base_pose"] = m.base_pose;
  j["effector_pose"] = m.effector_pose;
  return j;
}

inline void robot_from_json(const nlohmann::json& j, SerialChainModel& m) {
  if (j.contains("joint_types")) {
    for (int k = 0; k < 8; ++k) {
      const std::string t = j["joint_types"].at(k);
      if (t != "revolute" && t != "prismatic") {
        throw std::runtime_error("robot config: unknown joint type " + t);
      }
      m.joint_types[k] =
          t == "revolute" ? JointType::revolute : JointType::prismatic;
    }
  }
  if (j.contains("dh")) {
    for (int k = 0; k < 8; ++k) {
      for (int c = 0; c < 4; ++c) m.dh[k][c] = j["dh"].at(k).at(c).get<double>();
    }
  }
  if (j.contains("limits")) {
    for (int k = 0; k < 8; ++k) {
      m.limits[k].q_min = j["limits"].at(k).at(0).get<double>();
      m.limits[k].q_max = j["limits"].at(k).at(1).get<double>();
      m.limits[k].v_max = j["limits"].at(k).at(2).get<double>();
    }
  }
  if (j.contains("base_pose")) {
    for (int c = 0; c < 6; ++c) m.base_pose[c] = j["base_pose"].at(c).get<double>();
  }
  if (j.contains("effector_pose")) {
    for (int c = 0; c < 6; ++c) m.effector_pose[c] = j["effector_pose"].at(c).get<double>();
  }
}

inline nlohmann::ordered_json vec3_json(const Vec3& v) {
  return {v.x(), v.y(), v.z()};
}

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

inline nlohmann::ordered_json attached_point_json(const AttachedPoint& p) {
  return {{"robot", p.robot}, {"link", p.link}, {"offset", vec3_json(p.offset)}};
}

inline AttachedPoint attached_point_from_json(const nlohmann::json& j) {
  return {j.at("robot").get<int>(), j.at("link").get<int>(),
          vec3_from_json(j.at("offset"))};
}

}  // namespace detail

inline nlohmann::ordered_json config_json(const ScenarioConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["tick_rate"] = cfg.tick_rate;
  j["adaptive"] = cfg.adaptive;
  j["qp_failure_budget"] = cfg.qp_failure_budget;
  j["robots"]["r1"] = detail::robot_json(cfg.robot1);
  j["robots"]["r2"] = detail::robot_json(cfg.robot2);
  for (int i = 0; i < 8; ++i) {
    j["initial"]["q1"].push_back(cfg.q1_init(i));
    j["initial"]["q2"].push_back(cfg.q2_init(i));
  }
  j["camera"] = {{"focal_length", cfg.intrinsics.focal_length},
                 {"pixel_pitch", {cfg.intrinsics.pixel_pitch_x,
                                  cfg.intrinsics.pixel_pitch_y}},
                 {"resolution", {cfg.intrinsics.width, cfg.intrinsics.height}}};
  j["gains"]["task"] = {{"eta_q", cfg.task_gains.eta_q},
                        {"alpha", cfg.task_gains.alpha},
                        {"beta", cfg.task_gains.beta},
                        {"lambda", cfg.task_gains.lambda}};
  j["gains"]["adaptation"] = {{"eta_a", cfg.adapt_eta},
                              {"damping", cfg.adapt_damping},
                              {"bounds_gain", cfg.adapt_bounds_gain},
                              {"fov_margin_rate", cfg.adapt_fov_margin_rate},
                              {"focal_margin_rate", cfg.adapt_focal_margin_rate}};
  j["gains"]["eta_joint"] = cfg.eta_joint;
  j["trajectory"] = {{"center", detail::vec3_json(cfg.trajectory.center)},
                     {"radius", cfg.trajectory.radius},
                     {"period", cfg.trajectory.period},
                     {"duration", cfg.trajectory.duration}};
  j["constraints"]["theta_safe_deg"] = cfg.fov.theta_safe * 180.0 / M_PI;
  j["constraints"]["fov_subregion"] = {cfg.fov.sub_width, cfg.fov.sub_height};
  j["constraints"]["d_image"] = cfg.d_image;
  j["constraints"]["focal_band"] = cfg.focal_band;
  auto& cj = j["constraints"]["collision"];
  cj["eta_d"] = cfg.collision.eta_d;
  cj["eta_recover"] = cfg.collision.eta_recover;
  for (const auto& pp : cfg.collision.plane_pairs) {
    cj["plane_pairs"].push_back({{"point", detail::attached_point_json(pp.point)},
                                 {"normal", detail::vec3_json(pp.plane.normal)},
                                 {"plane_offset", pp.plane.offset},
                                 {"safe_distance", pp.safe_distance}});
  }
  for (const auto& pl : cfg.collision.line_pairs) {
    cj["line_pairs"].push_back(
        {{"point", detail::attached_point_json(pl.point)},
         {"line_point", detail::vec3_json(pl.line_point)},
         {"line_direction", detail::vec3_json(pl.line_direction)},
         {"safe_distance", pl.safe_distance}});
  }
  for (const auto& rr : cfg.collision.robot_pairs) {
    cj["robot_pairs"].push_back({{"a", detail::attached_point_json(rr.a)},
                                 {"b", detail::attached_point_json(rr.b)},
                                 {"safe_distance", rr.safe_distance}});
  }
  j["perturbation"] = {{"r1_length", cfg.perturbation.r1_length},
                       {"r1_angle_deg", cfg.perturbation.r1_angle * 180.0 / M_PI},
                       {"r2_length", cfg.perturbation.r2_length},
                       {"r2_angle_deg", cfg.perturbation.r2_angle * 180.0 / M_PI}};
  j["noise"] = {{"pixel_sigma", cfg.noise.pixel_sigma},
                {"quantize", cfg.noise.quantize}};
  j["trace"] = {{"dump_parameters", cfg.trace_dump_parameters}};
  return j;
}

// Any omitted key keeps its default value (the output of config_json on the
// default configuration documents the full schema).
inline ScenarioConfig load_config(const nlohmann::json& j) {
  ScenarioConfig cfg = default_scenario_config();
  cfg.seed = j.value("seed", cfg.seed);
  cfg.tick_rate = j.value("tick_rate", cfg.tick_rate);
  cfg.adaptive = j.value("adaptive", cfg.adaptive);
  cfg.qp_failure_budget = j.value("qp_failure_budget", cfg.qp_failure_budget);
  if (j.contains("robots")) {
    if (j["robots"].contains("r1")) detail::robot_from_json(j["robots"]["r1"], cfg.robot1);
    if (j["robots"].contains("r2")) detail::robot_from_json(j["robots"]["r2"], cfg.robot2);
  }
  if (j.contains("initial")) {
    const auto& init = j["initial"];
    if (init.contains("q1")) {
      for (int i = 0; i < 8; ++i) cfg.q1_init(i) = init["q1"].at(i).get<double>();
    }
    if (init.contains("q2")) {
      for (int i = 0; i < 8; ++i) cfg.q2_init(i) = init["q2"].at(i).get<double>();
    }
  }
  if (j.contains("camera")) {
    const auto& cam = j["camera"];
    cfg.intrinsics.focal_length = cam.value("focal_length", cfg.intrinsics.focal_length);
    if (cam.contains("pixel_pitch")) {
      cfg.intrinsics.pixel_pitch_x = cam["pixel_pitch"].at(0).get<double>();
      cfg.intrinsics.pixel_pitch_y = cam["pixel_pitch"].at(1).get<double>();
    }
    if (cam.contains("resolution")) {
      cfg.intrinsics.width = cam["resolution"].at(0).get<int>();
      cfg.intrinsics.height = cam["resolution"].at(1).get<int>();
    }
  }
  if (j.contains("gains")) {
    const auto& g = j["gains"];
    if (g.contains("task")) {
      cfg.task_gains.eta_q = g["task"].value("eta_q", cfg.task_gains.eta_q);
      cfg.task_gains.alpha = g["task"].value("alpha", cfg.task_gains.alpha);
      cfg.task_gains.beta = g["task"].value("beta", cfg.task_gains.beta);
      cfg.task_gains.lambda = g["task"].value("lambda", cfg.task_gains.lambda);
    }
    if (g.contains("adaptation")) {
      cfg.adapt_eta = g["adaptation"].value("eta_a", cfg.adapt_eta);
      cfg.adapt_damping = g["adaptation"].value("damping", cfg.adapt_damping);
      cfg.adapt_bounds_gain =
          g["adaptation"].value("bounds_gain", cfg.adapt_bounds_gain);
      cfg.adapt_fov_margin_rate =
          g["adaptation"].value("fov_margin_rate", cfg.adapt_fov_margin_rate);
      cfg.adapt_focal_margin_rate =
          g["adaptation"].value("focal_margin_rate", cfg.adapt_focal_margin_rate);
    }
    cfg.eta_joint = g.value("eta_joint", cfg.eta_joint);
  }
  if (j.contains("trajectory")) {
    const auto& t = j["trajectory"];
    if (t.contains("center")) cfg.trajectory.center = detail::vec3_from_json(t["center"]);
    cfg.trajectory.radius = t.value("radius", cfg.trajectory.radius);
    cfg.trajectory.period = t.value("period", cfg.trajectory.period);
    cfg.trajectory.duration = t.value("duration", cfg.trajectory.duration);
  }
  if (j.contains("constraints")) {
    const auto& c = j["constraints"];
    if (c.contains("theta_safe_deg")) {
      cfg.fov.theta_safe = c["theta_safe_deg"].get<double>() * M_PI / 180.0;
    }
    if (c.contains("fov_subregion")) {
      cfg.fov.sub_width = c["fov_subregion"].at(0).get<double>();
      cfg.fov.sub_height = c["fov_subregion"].at(1).get<double>();
    }
    cfg.d_image = c.value("d_image", cfg.d_image);
    cfg.focal_band = c.value("focal_band", cfg.focal_band);
    if (c.contains("collision")) {
      const auto& cj = c["collision"];
      cfg.collision.eta_d = cj.value("eta_d", cfg.collision.eta_d);
      cfg.collision.eta_recover =
          cj.value("eta_recover", cfg.collision.eta_recover);
      if (cj.contains("plane_pairs")) {
        cfg.collision.plane_pairs.clear();
        for (const auto& e : cj["plane_pairs"]) {
          cfg.collision.plane_pairs.push_back(
              {detail::attached_point_from_json(e.at("point")),
               {detail::vec3_from_json(e.at("normal")),
                e.at("plane_offset").get<double>()},
               e.at("safe_distance").get<double>()});
        }
      }
      if (cj.contains("line_pairs")) {
        cfg.collision.line_pairs.clear();
        for (const auto& e : cj["line_pairs"]) {
          cfg.collision.line_pairs.push_back(
              {detail::attached_point_from_json(e.at("point")),
               detail::vec3_from_json(e.at("line_point")),
               detail::vec3_from_json(e.at("line_direction")),
               e.at("safe_distance").get<double>()});
        }
      }
      if (cj.contains("robot_pairs")) {
        cfg.collision.robot_pairs.clear();
        for (const auto& e : cj["robot_pairs"]) {
          cfg.collision.robot_pairs.push_back(
              {detail::attached_point_from_json(e.at("a")),
               detail::attached_point_from_json(e.at("b")),
               e.at("safe_distance").get<double>()});
        }
      }
    }
  }
  if (j.contains("perturbation")) {
    const auto& p = j["perturbation"];
    cfg.perturbation.r1_length = p.value("r1_length", cfg.perturbation.r1_length);
    cfg.perturbation.r2_length = p.value("r2_length", cfg.perturbation.r2_length);
    if (p.contains("r1_angle_deg")) {
      cfg.perturbation.r1_angle = p["r1_angle_deg"].get<double>() * M_PI / 180.0;
    }
    if (p.contains("r2_angle_deg")) {
      cfg.perturbation.r2_angle = p["r2_angle_deg"].get<double>() * M_PI / 180.0;
    }
  }
  if (j.contains("noise")) {
    cfg.noise.pixel_sigma = j["noise"].value("pixel_sigma", cfg.noise.pixel_sigma);
    cfg.noise.quantize = j["noise"].value("quantize", cfg.noise.quantize);
  }
  if (j.contains("trace")) {
    cfg.trace_dump_parameters =
        j["trace"].value("dump_parameters", cfg.trace_dump_parameters);
  }
  return cfg;
}

inline ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config_file: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return load_config(j);
}

}  // namespace fovea
