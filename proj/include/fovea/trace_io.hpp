#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fovea/scenario.hpp"

namespace fovea {

namespace detail {

// Shortest exact decimal form; %.17g round-trips IEEE doubles.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_hash(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline const char* adapt_status_name(const TraceRecord& r) {
  return r.adapt_ran ? to_string(r.adapt_status) : "skipped";
}

}  // namespace detail

inline std::string trace_header(bool dump_parameters) {
  std::string h = "tick,time";
  for (int i = 0; i < 16; ++i) h += ",q" + std::to_string(i);
  h += ",param_hash,t1_err,r1_err,t2_err,pixel_u,pixel_v,y_err"
       ",g_fov_true,g_fov_est,in_real_fov,in_est_fov,active_constraints"
       ",task_qp_status,adapt_qp_status,lyapunov_rate";
  if (dump_parameters) {
    for (int i = 0; i < 88; ++i) h += ",a" + std::to_string(i);
  }
  return h;
}

inline void emit_trace(const std::vector<TraceRecord>& trace,
                       const std::string& path, bool dump_parameters = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_trace: cannot open " + path);
  out << trace_header(dump_parameters) << "\n";
  for (const auto& r : trace) {
    out << r.tick << ',' << detail::format_double(r.time);
    for (int i = 0; i < 16; ++i) out << ',' << detail::format_double(r.q(i));
    out << ',' << detail::format_hash(r.param_hash);
    out << ',' << detail::format_double(r.t1_err);
    out << ',' << detail::format_double(r.r1_err);
    out << ',' << detail::format_double(r.t2_err);
    if (r.pixel_valid) {
      out << ',' << detail::format_double(r.pixel_u) << ','
          << detail::format_double(r.pixel_v) << ','
          << detail::format_double(r.y_err);
    } else {
      out << ",,,";
    }
    out << ',' << detail::format_double(r.g_fov_true);
    out << ',' << detail::format_double(r.g_fov_est);
    out << ',' << (r.in_real_fov ? 1 : 0);
    out << ',' << (r.in_est_fov ? 1 : 0);
    out << ',' << r.active_constraints;
    out << ',' << to_string(r.task_status);
    out << ',' << detail::adapt_status_name(r);
    if (r.adapt_ran) {
      out << ',' << detail::format_double(r.lyapunov_rate);
    } else {
      out << ',';
    }
    if (dump_parameters) {
      for (int i = 0; i < 88; ++i) {
        out << ',' << detail::format_double(r.parameters(i));
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("emit_trace: write failed for " + path);
}

inline QpStatus status_from_name(const std::string& s) {
  if (s == "optimal") return QpStatus::optimal;
  if (s == "infeasible") return QpStatus::infeasible;
  if (s == "max-iter") return QpStatus::max_iterations;
  throw std::runtime_error("unknown QP status: " + s);
}

inline std::vector<TraceRecord> parse_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("parse_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("parse_trace_csv: empty file " + path);
  }
  const bool dump_parameters = line == trace_header(true);
  if (!dump_parameters && line != trace_header(false)) {
    throw std::runtime_error("parse_trace_csv: unexpected header in " + path);
  }

  std::vector<TraceRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    // a trailing empty cell is dropped by getline; tolerate it
    const std::size_t expected = dump_parameters ? 26u + 88u : 26u;
    while (f.size() < expected) f.emplace_back();

    TraceRecord r;
    int k = 0;
    r.tick = std::stoi(f[k++]);
    r.time = std::stod(f[k++]);
    for (int i = 0; i < 16; ++i) r.q(i) = std::stod(f[k++]);
    r.param_hash = std::stoull(f[k++], nullptr, 16);
    r.t1_err = std::stod(f[k++]);
    r.r1_err = std::stod(f[k++]);
    r.t2_err = std::stod(f[k++]);
    r.pixel_valid = !f[k].empty();
    if (r.pixel_valid) {
      r.pixel_u = std::stod(f[k]);
      r.pixel_v = std::stod(f[k + 1]);
      r.y_err = std::stod(f[k + 2]);
    }
    k += 3;
    r.g_fov_true = std::stod(f[k++]);
    r.g_fov_est = std::stod(f[k++]);
    r.in_real_fov = f[k++] == "1";
    r.in_est_fov = f[k++] == "1";
    r.active_constraints = static_cast<std::uint32_t>(std::stoul(f[k++]));
    r.task_status = status_from_name(f[k++]);
    if (f[k] == "skipped") {
      r.adapt_ran = false;
    } else {
      r.adapt_ran = true;
      r.adapt_status = status_from_name(f[k]);
    }
    ++k;
    if (r.adapt_ran) r.lyapunov_rate = std::stod(f[k]);
    ++k;
    if (dump_parameters) {
      for (int i = 0; i < 88; ++i) r.parameters(i) = std::stod(f[k++]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const ScenarioSummary& s) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = s.seed;
  j["adaptive"] = s.adaptive;
  j["ticks"] = s.ticks;
  j["adaptation_ticks"] = s.adaptation_ticks;
  j["task_qp_failures"] = s.task_qp_failures;
  j["adapt_qp_failures"] = s.adapt_qp_failures;
  j["duty_ratio"] = s.duty_ratio;
  j["duty_ratio_estimated"] = s.duty_ratio_estimated;
  j["max_deviation_deg"] = s.max_deviation_deg;
  j["min_estimated_margin"] = s.min_estimated_margin;
  j["mean_line_error_last_quarter"] = s.mean_line_error_last_quarter;
  j["final_param_error_length_m"] = s.final_param_error_length;
  j["final_param_error_angle_rad"] = s.final_param_error_angle;
  return j;
}

inline void emit_summary(const ScenarioSummary& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_summary: cannot open " + path);
  out << summary_json(s).dump(2) << "\n";
  if (!out) throw std::runtime_error("emit_summary: write failed for " + path);
}

}  // namespace fovea
