// Copyright 2026 The visplan Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VISPLAN_IO_HPP_
#define VISPLAN_IO_HPP_

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "visplan/environment.hpp"
#include "visplan/evaluator.hpp"
#include "visplan/frames.hpp"
#include "visplan/position_planner.hpp"
#include "visplan/visibility.hpp"
#include "visplan/yaw_planner.hpp"

namespace visplan {

inline constexpr const char* kCurveSchema = "visplan-curve-v1";
inline constexpr const char* kMetricsSchema = "visplan-metrics-v1";
inline constexpr const char* kTraceSchema = "visplan-trace-v1";
inline constexpr const char* kAnalysisSchema = "visplan-analysis-v1";

inline nlohmann::json curve_to_json(const UniformBSpline& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (int c = 0; c < curve.num_control_points(); ++c) {
    nlohmann::json p = nlohmann::json::array();
    for (int r = 0; r < curve.dimension(); ++r) p.push_back(curve.control_points()(r, c));
    points.push_back(std::move(p));
  }
  return {{"schema", kCurveSchema},
          {"degree", curve.degree()},
          {"knot_span", curve.knot_span()},
          {"start_time", curve.start_time()},
          {"control_points", std::move(points)}};
}

inline UniformBSpline curve_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kCurveSchema) {
    throw std::invalid_argument("curve_from_json: unexpected schema field");
  }
  const auto& pts = j.at("control_points");
  if (pts.empty()) throw std::invalid_argument("curve_from_json: no control points");
  const int dim = static_cast<int>(pts[0].size());
  Eigen::MatrixXd q(dim, pts.size());
  for (size_t c = 0; c < pts.size(); ++c) {
    for (int r = 0; r < dim; ++r) q(r, c) = pts[c][r].get<double>();
  }
  return UniformBSpline(j.at("degree").get<int>(), std::move(q),
                        j.at("knot_span").get<double>(), j.at("start_time").get<double>());
}

inline nlohmann::json metrics_to_json(const PerceptionMetrics& m) {
  return {{"schema", kMetricsSchema},
          {"nu", m.nu},
          {"rho_max", m.rho_max},
          {"covisible_counts", m.covisible_counts},
          {"max_parallax", m.max_parallax},
          {"min_count", m.min_count},
          {"mean_count", m.mean_count},
          {"parallax_violations", m.parallax_violations}};
}

inline nlohmann::json trace_to_json(const OptimizationTrace& t) {
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& r : t.iterations) {
    iters.push_back({{"iteration", r.iteration},
                     {"total_cost", r.total_cost},
                     {"gradient_norm", r.gradient_norm},
                     {"knot_span", r.knot_span},
                     {"terms", r.terms}});
  }
  return {{"schema", kTraceSchema},
          {"converged", t.converged},
          {"stop_reason", t.stop_reason},
          {"initial_cost", t.initial_cost},
          {"final_cost", t.final_cost},
          {"iterations", std::move(iters)}};
}

/// Batch configuration. Angles are stored in degrees in the JSON document and
/// converted here; unset fields keep the documented defaults.
struct PlannerConfig {
  std::string scene_path;
  EndpointState start;
  EndpointState goal;
  FovSpec fov;
  double k1 = 40.0, k2 = 10.0, k3 = 20.0;
  PositionPlanConfig position;
  YawPlanConfig yaw;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  VisibilityParams visibility_params() const { return VisibilityParams::for_fov(fov, k1, k2, k3); }
};

namespace detail {

inline Eigen::Vector3d config_vec3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument("config: " + what + " must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }

}  // namespace detail

inline PlannerConfig parse_config(const nlohmann::json& j) {
  PlannerConfig cfg;
  cfg.scene_path = j.at("scene").get<std::string>();
  cfg.start.position = detail::config_vec3(j.at("start").at("position"), "start.position");
  if (j.at("start").contains("velocity")) {
    cfg.start.velocity = detail::config_vec3(j["start"]["velocity"], "start.velocity");
  }
  cfg.goal.position = detail::config_vec3(j.at("goal").at("position"), "goal.position");
  if (j.at("goal").contains("velocity")) {
    cfg.goal.velocity = detail::config_vec3(j["goal"]["velocity"], "goal.velocity");
  }
  if (j.contains("fov")) {
    const auto& f = j["fov"];
    cfg.fov.alpha_h = detail::deg2rad(f.value("alpha_h_deg", 90.0));
    cfg.fov.alpha_v = detail::deg2rad(f.value("alpha_v_deg", 60.0));
    cfg.fov.d_max = f.value("d_max", 8.0);
  }
  cfg.fov.validate();
  if (j.contains("visibility")) {
    const auto& v = j["visibility"];
    cfg.k1 = v.value("k1", 40.0);
    cfg.k2 = v.value("k2", 10.0);
    cfg.k3 = v.value("k3", 20.0);
  }
  if (j.contains("position")) {
    const auto& p = j["position"];
    auto& c = cfg.position;
    c.lambda_vc = p.value("lambda_vc", c.lambda_vc);
    c.lambda_para = p.value("lambda_para", c.lambda_para);
    c.lambda_smooth = p.value("lambda_smooth", c.lambda_smooth);
    c.lambda_safe = p.value("lambda_safe", c.lambda_safe);
    c.lambda_time = p.value("lambda_time", c.lambda_time);
    c.lambda_feas = p.value("lambda_feas", c.lambda_feas);
    c.a1 = p.value("a1", c.a1);
    c.a2 = p.value("a2", c.a2);
    c.nu = p.value("nu", c.nu);
    if (p.contains("rho_max_deg")) c.rho_max = detail::deg2rad(p["rho_max_deg"].get<double>());
    c.v_max = p.value("v_max", c.v_max);
    c.a_max = p.value("a_max", c.a_max);
    c.d_safe = p.value("d_safe", c.d_safe);
    c.dt_min = p.value("dt_min", c.dt_min);
    c.gravity = p.value("gravity", c.gravity);
    c.max_iterations = p.value("max_iterations", c.max_iterations);
    c.gradient_tolerance = p.value("gradient_tolerance", c.gradient_tolerance);
    c.relative_cost_tolerance = p.value("relative_cost_tolerance", c.relative_cost_tolerance);
  }
  cfg.position.validate();
  if (j.contains("yaw")) {
    const auto& y = j["yaw"];
    auto& c = cfg.yaw;
    c.samples_per_layer = y.value("samples_per_layer", c.samples_per_layer);
    c.psi_dot_max = y.value("psi_dot_max", c.psi_dot_max);
    c.lambda1 = y.value("lambda1", c.lambda1);
    c.lambda2 = y.value("lambda2", c.lambda2);
    c.max_iterations = y.value("max_iterations", c.max_iterations);
    c.gradient_tolerance = y.value("gradient_tolerance", c.gradient_tolerance);
    c.relative_cost_tolerance = y.value("relative_cost_tolerance", c.relative_cost_tolerance);
  }
  cfg.yaw.validate();
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

inline PlannerConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("load_config: parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

struct PlanArtifacts {
  UniformBSpline position_curve;
  UniformBSpline yaw_curve;
  OptimizationTrace position_trace;
  OptimizationTrace yaw_trace;
  PerceptionMetrics metrics;
};

/// The full two-stage pipeline: position optimization, yaw primitive search,
/// yaw refinement, then per-frame metrics.
inline PlanArtifacts run_pipeline(const Environment& env, const PlannerConfig& cfg) {
  const VisibilityParams params = cfg.visibility_params();
  PositionPlanResult pos =
      optimize_position(env, cfg.start, cfg.goal, cfg.fov, params, cfg.position);
  const auto states = knot_states(pos.curve, nullptr, gravity_vector(cfg.position.gravity));
  const YawGraph graph = build_yaw_graph(states, env, cfg.fov, params, cfg.yaw,
                                         pos.curve.knot_span(), cfg.position.gravity);
  const std::vector<double> psi_star = solve_primitives(graph);
  YawPlanResult yaw =
      optimize_yaw(pos.curve, psi_star, env, cfg.fov, params, cfg.yaw, cfg.position.gravity);
  PerceptionMetrics metrics =
      trajectory_metrics(pos.curve, yaw.yaw_curve, env, cfg.fov, cfg.position.nu,
                         cfg.position.rho_max, cfg.position.gravity);
  return {std::move(pos.curve), std::move(yaw.yaw_curve), std::move(pos.trace),
          std::move(yaw.trace), std::move(metrics)};
}

/// Trajectory CSV at 100 Hz: t, position, velocity, acceleration, yaw and yaw
/// rate per row. Fixed %.17g formatting keeps the output byte-reproducible.
inline std::string trajectory_csv(const UniformBSpline& position_curve,
                                  const UniformBSpline& yaw_curve, double gravity = kGravity) {
  TrajectorySampler sampler(position_curve, yaw_curve, gravity_vector(gravity));
  std::string out = "t,x,y,z,vx,vy,vz,ax,ay,az,yaw,yaw_rate\n";
  const UniformBSpline vel = position_curve.derivative();
  const UniformBSpline acc = vel.derivative();
  const double t0 = position_curve.start_time();
  const double t1 = position_curve.end_time();
  char line[512];
  for (int k = 0;; ++k) {
    double t = t0 + k * 0.01;
    if (t > t1 + 1e-9) break;
    t = std::min(t, t1);
    const Eigen::Vector3d p = position_curve.eval(t).head<3>();
    const Eigen::Vector3d v = vel.eval(t).head<3>();
    const Eigen::Vector3d a = acc.eval(t).head<3>();
    const double yaw = yaw_curve.eval(t)(0);
    const double yaw_rate = sampler.yaw_rate(t);
    std::snprintf(line, sizeof(line),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t,
                  p.x(), p.y(), p.z(), v.x(), v.y(), v.z(), a.x(), a.y(), a.z(), yaw, yaw_rate);
    out += line;
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_text_file: cannot open " + path);
  out << content;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace visplan

#endif  // VISPLAN_IO_HPP_
