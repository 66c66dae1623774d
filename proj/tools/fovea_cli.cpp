#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fovea/fd_check.hpp"
#include "fovea/scenario.hpp"
#include "fovea/scenario_config.hpp"
#include "fovea/trace_io.hpp"

using namespace fovea;

namespace {

constexpr int kExitInfeasibleInit = 2;
constexpr int kExitQpBudget = 3;

ScenarioConfig load_or_default(const std::string& path) {
  if (path.empty()) return default_scenario_config();
  return load_config_file(path);
}

void print_summary_line(const ScenarioSummary& s) {
  std::printf(
      "%s run: duty=%.4f duty_est=%.4f max_dev=%.3f deg min_g_est=%.3g "
      "ytilde_lastq=%.3g qp_failures=%d/%d\n",
      s.adaptive ? "adaptive" : "fixed   ", s.duty_ratio,
      s.duty_ratio_estimated, s.max_deviation_deg, s.min_estimated_margin,
      s.mean_line_error_last_quarter, s.task_qp_failures, s.adapt_qp_failures);
}

int qp_failures(const ScenarioSummary& s) {
  return s.task_qp_failures + s.adapt_qp_failures;
}

// --- check-jacobians ---------------------------------------------------------

SerialChainModel sample_model(Rng& rng) {
  SerialChainModel m;
  for (int j = 0; j < SerialChainModel::kJointCount; ++j) {
    m.joint_types[j] =
        rng.next_double() < 0.25 ? JointType::prismatic : JointType::revolute;
    m.dh[j] = {rng.uniform(-M_PI, M_PI), rng.uniform(-0.4, 0.4),
               rng.uniform(-0.4, 0.4), rng.uniform(-M_PI, M_PI)};
    m.limits[j] = {-3.0, 3.0, 2.0};
  }
  for (int i = 0; i < 3; ++i) {
    m.base_pose[i] = rng.uniform(-0.5, 0.5);
    m.base_pose[3 + i] = rng.uniform(-M_PI, M_PI);
    m.effector_pose[i] = rng.uniform(-0.2, 0.2);
    m.effector_pose[3 + i] = rng.uniform(-M_PI, M_PI);
  }
  return m;
}

Vector8 sample_q(Rng& rng) {
  Vector8 q;
  for (int j = 0; j < 8; ++j) q(j) = rng.uniform(-1.5, 1.5);
  return q;
}

Vector44 sample_parameters(Rng& rng) {
  Vector44 a;
  for (int c = 0; c < 44; ++c) {
    a(c) = is_angular_parameter(c) ? rng.uniform(-M_PI, M_PI)
                                   : rng.uniform(-0.4, 0.4);
  }
  return a;
}

struct SampledPair {
  SerialChainModel m1, m2;
  Vector8 q1, q2;
  Vector88 a;
};

SampledPair sample_pair(Rng& rng) {
  SampledPair p;
  while (true) {
    p.m1 = sample_model(rng);
    p.m2 = sample_model(rng);
    p.q1 = sample_q(rng);
    p.q2 = sample_q(rng);
    p.a.head<44>() = sample_parameters(rng);
    p.a.tail<44>() = sample_parameters(rng);
    const auto s1 = forward_kinematics(p.m1, p.q1, Vector44(p.a.head<44>()));
    const auto s2 = forward_kinematics(p.m2, p.q2, Vector44(p.a.tail<44>()));
    if ((s1.translation - s2.translation).norm() > 0.05) return p;
  }
}

bool report_suite(const char* name, double worst, double tol) {
  const bool ok = worst < tol;
  std::printf("[%s] %-28s max rel err %.3e (tol %.0e)\n", ok ? " OK " : "FAIL",
              name, worst, tol);
  return ok;
}

int run_check_jacobians(int trials) {
  Rng rng(2024);
  bool all_ok = true;

  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto m = sample_model(rng);
    worst = std::max(
        worst, jacobians_fd_check(m, sample_q(rng), sample_parameters(rng), 1e-6));
  }
  all_ok &= report_suite("forward kinematics J", worst, 1e-6);

  worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto m = sample_model(rng);
    const Vector8 q = sample_q(rng);
    const Vector44 a = sample_parameters(rng);
    const int link = 1 + static_cast<int>(rng.next_u64() % 9);
    const Vec3 offset(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                      rng.uniform(-0.2, 0.2));
    const auto ps = point_kinematics(m, q, a, link, offset);
    const auto fq = [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
      return vec4(point_kinematics(m, Vector8(qv), a, link, offset).point);
    };
    const auto fa = [&](const Eigen::VectorXd& av) -> Eigen::VectorXd {
      return vec4(point_kinematics(m, q, Vector44(av), link, offset).point);
    };
    worst = std::max(worst, max_relative_error(
                                ps.Jp_q, central_difference_jacobian(fq, q, 1e-6)));
    worst = std::max(worst, max_relative_error(
                                ps.Jp_a, central_difference_jacobian(fa, a, 1e-6)));
  }
  all_ok &= report_suite("attached point J", worst, 1e-6);

  worst = 0.0;
  double worst_adapt = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto p = sample_pair(rng);
    const auto s1 = forward_kinematics(p.m1, p.q1, Vector44(p.a.head<44>()));
    const auto s2 = forward_kinematics(p.m2, p.q2, Vector44(p.a.tail<44>()));
    const auto line_fd = central_difference_jacobian(
        [&](const Eigen::VectorXd& av) -> Eigen::VectorXd {
          const auto w1 = forward_kinematics(p.m1, p.q1, Vector44(av.head(44)));
          const auto w2 = forward_kinematics(p.m2, p.q2, Vector44(av.tail(44)));
          return vec4(
              estimated_line_direction(w1.translation, w2.translation));
        },
        p.a, 1e-6);
    worst = std::max(
        worst, max_relative_error(line_direction_param_jacobian(s1, s2), line_fd));
    const auto adapt_fd = central_difference_jacobian(
        [&](const Eigen::VectorXd& av) -> Eigen::VectorXd {
          const auto w1 = forward_kinematics(p.m1, p.q1, Vector44(av.head(44)));
          const auto w2 = forward_kinematics(p.m2, p.q2, Vector44(av.tail(44)));
          return vec4(to_optical_frame(
              w2.rotation,
              estimated_line_direction(w1.translation, w2.translation)));
        },
        p.a, 1e-6);
    worst_adapt = std::max(
        worst_adapt, max_relative_error(adaptation_jacobian(s1, s2), adapt_fd));
  }
  all_ok &= report_suite("line direction J (params)", worst, 1e-5);
  all_ok &= report_suite("adaptation J (params)", worst_adapt, 1e-5);

  worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto p = sample_pair(rng);
    const auto s1 = forward_kinematics(p.m1, p.q1, Vector44(p.a.head<44>()));
    const auto s2 = forward_kinematics(p.m2, p.q2, Vector44(p.a.tail<44>()));
    const double theta_safe = 0.2;

    const auto row = fov_cone_row(
        s2.rotation, embed_arm_block(s2.Jr_q, 1, false), s1.translation,
        embed_arm_block(s1.Jt_q, 0, false), s2.translation,
        embed_arm_block(s2.Jt_q, 1, false), theta_safe, 2.0);
    if (row) {
      Eigen::VectorXd q16(16);
      q16 << p.q1, p.q2;
      const auto fd = central_difference_jacobian(
          [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
            const auto w1 =
                forward_kinematics(p.m1, Vector8(qv.head(8)), Vector44(p.a.head<44>()));
            const auto w2 =
                forward_kinematics(p.m2, Vector8(qv.tail(8)), Vector44(p.a.tail<44>()));
            Eigen::VectorXd out(1);
            out(0) = fov_cone_margin(w2.rotation, w1.translation, w2.translation,
                                     theta_safe);
            return out;
          },
          q16, 1e-6);
      worst = std::max(worst, max_relative_error(-row->coeffs, fd));
    }

    const auto pa = point_kinematics(p.m1, p.q1, Vector44(p.a.head<44>()), 8,
                                     Vec3(0.05, -0.02, 0.1));
    const Plane plane{Vec3(0.2, -0.3, 0.933).normalized(), -0.3};
    const auto prow =
        point_plane_row(vec3(pa.point, 1e-9), Eigen::MatrixXd(pa.Jp_q), plane,
                        0.05, 2.0);
    const auto pfd = central_difference_jacobian(
        [&](const Eigen::VectorXd& qv) -> Eigen::VectorXd {
          const auto w = point_kinematics(p.m1, Vector8(qv),
                                          Vector44(p.a.head<44>()), 8,
                                          Vec3(0.05, -0.02, 0.1));
          Eigen::VectorXd out(1);
          out(0) = plane.normal.dot(vec3(w.point, 1e-9)) - plane.offset;
          return out;
        },
        p.q1, 1e-6);
    worst = std::max(worst, max_relative_error(-prow.coeffs, pfd));
  }
  all_ok &= report_suite("VFI constraint rows", worst, 1e-5);

  std::printf("%s\n", all_ok ? "all jacobian suites passed" : "FAILURES above");
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive constrained kinematic control simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string adaptive_flag = "on";
  std::string trace_path;
  std::string summary_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 100;

  auto* run = app.add_subcommand("run", "run one closed-loop scenario");
  run->add_option("--config", config_path, "scenario config JSON");
  run->add_option("--adaptive", adaptive_flag, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  run->add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--trace", trace_path, "write the per-tick trace CSV");
  run->add_option("--summary", summary_path, "write the summary JSON");

  auto* compare = app.add_subcommand(
      "compare", "paired adaptive/non-adaptive runs with one seed");
  compare->add_option("--config", config_path, "scenario config JSON");
  compare->add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { seed_set = true; });

  auto* check = app.add_subcommand("check-jacobians",
                                   "finite-difference validation suites");
  check->add_option("--trials", trials, "random states per suite");

  auto* print_cfg =
      app.add_subcommand("print-config", "emit the default config JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*print_cfg) {
      std::cout << config_json(default_scenario_config()).dump(2) << "\n";
      return 0;
    }
    if (*check) {
      return run_check_jacobians(trials);
    }
    if (*run) {
      ScenarioConfig cfg = load_or_default(config_path);
      if (seed_set) cfg.seed = seed;
      cfg.adaptive = adaptive_flag == "on";
      const ScenarioResult result = run_scenario(cfg);
      print_summary_line(result.summary);
      if (!trace_path.empty()) {
        emit_trace(result.trace, trace_path, cfg.trace_dump_parameters);
      }
      if (!summary_path.empty()) emit_summary(result.summary, summary_path);
      if (qp_failures(result.summary) > cfg.qp_failure_budget) {
        std::fprintf(stderr, "QP failure budget exceeded: %d > %d\n",
                     qp_failures(result.summary), cfg.qp_failure_budget);
        return kExitQpBudget;
      }
      return 0;
    }
    if (*compare) {
      ScenarioConfig cfg = load_or_default(config_path);
      if (seed_set) cfg.seed = seed;
      cfg.adaptive = true;
      const auto on = run_scenario(cfg);
      cfg.adaptive = false;
      const auto off = run_scenario(cfg);
      print_summary_line(on.summary);
      print_summary_line(off.summary);
      std::printf("duty ratio: adaptive %.1f%% vs fixed %.1f%% (gap %.1f points)\n",
                  100.0 * on.summary.duty_ratio, 100.0 * off.summary.duty_ratio,
                  100.0 * (on.summary.duty_ratio - off.summary.duty_ratio));
      if (qp_failures(on.summary) > cfg.qp_failure_budget ||
          qp_failures(off.summary) > cfg.qp_failure_budget) {
        std::fprintf(stderr, "QP failure budget exceeded\n");
        return kExitQpBudget;
      }
      return 0;
    }
  } catch (const InfeasibleInitialization& e) {
    std::fprintf(stderr, "infeasible initialization: %s\n", e.what());
    return kExitInfeasibleInit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
