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

// Batch front-end: plan (full two-stage pipeline), evaluate (per-frame
// metrics of saved trajectories, optionally against a perception-agnostic
// re-plan) and analyze (visibility model fidelity / tilt sensitivity).
//
// Exit codes: 0 success, 1 configuration or file error, 2 infeasible scene.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "visplan/environment.hpp"
#include "visplan/evaluator.hpp"
#include "visplan/io.hpp"

namespace {

int log_level() {
  const char* env = std::getenv("VISPLAN_LOG");
  if (env == nullptr) return 1;
  const std::string v(env);
  if (v == "quiet") return 0;
  if (v == "debug") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[visplan] " << msg << "\n";
}

constexpr int kExitConfigError = 1;
constexpr int kExitInfeasible = 2;

int run_plan(const std::string& config_path, const std::string& scene_override,
             const std::string& out_override, std::uint64_t seed, bool seed_set) {
  visplan::PlannerConfig cfg = visplan::load_config(config_path);
  if (!scene_override.empty()) cfg.scene_path = scene_override;
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (seed_set) cfg.seed = seed;

  const visplan::Environment env = visplan::Environment::load_scene(cfg.scene_path);

  // Endpoint feasibility is a property of the scene, not the configuration.
  for (const auto* ep : {&cfg.start, &cfg.goal}) {
    if (!env.bounds().contains(ep->position) ||
        env.clearance(ep->position) < cfg.position.d_safe) {
      std::cerr << "error: endpoint [" << ep->position.transpose()
                << "] is blocked or out of bounds\n";
      return kExitInfeasible;
    }
  }

  info("planning " + cfg.scene_path);
  const visplan::PlanArtifacts artifacts = visplan::run_pipeline(env, cfg);

  std::filesystem::create_directories(cfg.output_dir);
  const std::string dir = cfg.output_dir + "/";
  visplan::write_json_file(dir + "position_curve.json",
                           visplan::curve_to_json(artifacts.position_curve));
  visplan::write_json_file(dir + "yaw_curve.json", visplan::curve_to_json(artifacts.yaw_curve));
  visplan::write_json_file(dir + "metrics.json", visplan::metrics_to_json(artifacts.metrics));
  visplan::write_json_file(dir + "trace.json",
                           {{"schema", visplan::kTraceSchema},
                            {"position", visplan::trace_to_json(artifacts.position_trace)},
                            {"yaw", visplan::trace_to_json(artifacts.yaw_trace)}});
  visplan::write_text_file(
      dir + "trajectory.csv",
      visplan::trajectory_csv(artifacts.position_curve, artifacts.yaw_curve,
                              cfg.position.gravity));
  info("wrote artifacts to " + cfg.output_dir);
  return 0;
}

int run_evaluate(const std::string& position_path, const std::string& yaw_path,
                 const std::string& scene_path, double nu, double rho_max_deg, double alpha_h_deg,
                 double alpha_v_deg, double d_max, const std::string& out_dir, bool baseline,
                 const std::string& config_path) {
  const visplan::Environment env = visplan::Environment::load_scene(scene_path);
  visplan::FovSpec fov;
  fov.alpha_h = alpha_h_deg * M_PI / 180.0;
  fov.alpha_v = alpha_v_deg * M_PI / 180.0;
  fov.d_max = d_max;
  fov.validate();
  const double rho_max = rho_max_deg * M_PI / 180.0;

  std::ifstream pos_in(position_path), yaw_in(yaw_path);
  if (!pos_in || !yaw_in) {
    std::cerr << "error: cannot open trajectory files\n";
    return kExitConfigError;
  }
  nlohmann::json pos_json, yaw_json;
  pos_in >> pos_json;
  yaw_in >> yaw_json;
  const visplan::UniformBSpline position_curve = visplan::curve_from_json(pos_json);
  const visplan::UniformBSpline yaw_curve = visplan::curve_from_json(yaw_json);

  const visplan::PerceptionMetrics metrics =
      visplan::trajectory_metrics(position_curve, yaw_curve, env, fov, nu, rho_max);

  nlohmann::json out = visplan::metrics_to_json(metrics);
  if (baseline) {
    if (config_path.empty()) {
      std::cerr << "error: --baseline requires --config for the re-plan\n";
      return kExitConfigError;
    }
    visplan::PlannerConfig cfg = visplan::load_config(config_path);
    cfg.position.lambda_vc = 0.0;
    cfg.position.lambda_para = 0.0;
    info("re-planning perception-agnostic baseline");
    const visplan::PlanArtifacts base = visplan::run_pipeline(env, cfg);
    out = {{"planned", visplan::metrics_to_json(metrics)},
           {"baseline", visplan::metrics_to_json(base.metrics)}};
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    visplan::write_json_file(out_dir + "/metrics.json", out);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_analyze(const std::string& kind, int samples, double margin_deg, std::uint64_t seed,
                double a_max, double alpha_h_deg, double k3, int sphere_samples, int tilt_samples,
                const std::string& out_dir) {
  nlohmann::json report;
  if (kind == "fidelity") {
    visplan::FovSpec fov;
    fov.alpha_h = alpha_h_deg * M_PI / 180.0;
    const auto params = visplan::VisibilityParams::for_fov(fov);
    const double agreement =
        visplan::model_fidelity(params, fov, samples, margin_deg * M_PI / 180.0, seed);
    report = {{"schema", visplan::kAnalysisSchema},
              {"kind", "fidelity"},
              {"samples", samples},
              {"margin_deg", margin_deg},
              {"seed", seed},
              {"agreement", agreement}};
  } else if (kind == "zeta") {
    visplan::ZetaGrid grid;
    grid.sphere_samples = sphere_samples;
    grid.tilt_samples = tilt_samples;
    const auto zr =
        visplan::tilt_sensitivity_zeta(a_max, alpha_h_deg * M_PI / 180.0, k3, grid);
    report = {{"schema", visplan::kAnalysisSchema},
              {"kind", "zeta"},
              {"zeta", zr.zeta},
              {"sample_count", zr.sample_count},
              {"a_max", zr.a_max},
              {"alpha_h_deg", alpha_h_deg},
              {"eta_max", zr.eta_max},
              {"k3", k3}};
  } else {
    std::cerr << "error: unknown analysis kind '" << kind << "' (expected fidelity or zeta)\n";
    return kExitConfigError;
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    visplan::write_json_file(out_dir + "/analysis.json", report);
  }
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perception-aware quadrotor trajectory generation"};
  app.require_subcommand(1);

  std::string config_path, scene_path, out_dir;
  std::uint64_t seed = 0;

  auto* plan = app.add_subcommand("plan", "Run the full two-stage pipeline");
  plan->add_option("--config", config_path, "Planner configuration JSON")->required();
  plan->add_option("--scene", scene_path, "Override the scene file");
  plan->add_option("--out", out_dir, "Override the output directory");
  auto* seed_opt = plan->add_option("--seed", seed, "Override the random seed");

  std::string position_path, yaw_path, eval_scene, eval_config;
  double nu = 20.0, rho_max_deg = 10.0, alpha_h_deg = 90.0, alpha_v_deg = 60.0, d_max = 8.0;
  bool baseline = false;
  auto* evaluate = app.add_subcommand("evaluate", "Per-frame metrics of saved trajectories");
  evaluate->add_option("--position", position_path, "Position curve JSON")->required();
  evaluate->add_option("--yaw", yaw_path, "Yaw curve JSON")->required();
  evaluate->add_option("--scene", eval_scene, "Scene JSON")->required();
  evaluate->add_option("--nu", nu, "Camera frame rate, Hz");
  evaluate->add_option("--rho-max-deg", rho_max_deg, "Per-frame parallax threshold, degrees");
  evaluate->add_option("--alpha-h-deg", alpha_h_deg, "Horizontal FoV, degrees");
  evaluate->add_option("--alpha-v-deg", alpha_v_deg, "Vertical FoV, degrees");
  evaluate->add_option("--d-max", d_max, "FoV depth, meters");
  evaluate->add_option("--out", out_dir, "Output directory");
  evaluate->add_flag("--baseline", baseline,
                     "Also re-plan with perception weights zeroed and report both metric sets");
  evaluate->add_option("--config", eval_config, "Planner configuration for the baseline re-plan");

  std::string kind;
  int samples = 100000;
  double margin_deg = 3.0, a_max = 2.5, k3 = 20.0;
  int sphere_samples = 4096, tilt_samples = 33;
  auto* analyze = app.add_subcommand("analyze", "Visibility model analyses");
  analyze->add_option("--kind", kind, "fidelity or zeta")->required();
  analyze->add_option("--samples", samples, "Fidelity sample count");
  analyze->add_option("--margin-deg", margin_deg, "Fidelity boundary margin, degrees");
  analyze->add_option("--seed", seed, "Fidelity sampling seed");
  analyze->add_option("--a-max", a_max, "Zeta: acceleration limit, m/s^2");
  analyze->add_option("--alpha-h-deg", alpha_h_deg, "FoV horizontal angle, degrees");
  analyze->add_option("--k3", k3, "Zeta: horizontal visibility steepness");
  analyze->add_option("--sphere-samples", sphere_samples, "Zeta: Fibonacci sphere points");
  analyze->add_option("--tilt-samples", tilt_samples, "Zeta: tilt grid points per axis");
  analyze->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) {
      return run_plan(config_path, scene_path, out_dir, seed, seed_opt->count() > 0);
    }
    if (evaluate->parsed()) {
      return run_evaluate(position_path, yaw_path, eval_scene, nu, rho_max_deg, alpha_h_deg,
                          alpha_v_deg, d_max, out_dir, baseline, eval_config);
    }
    if (analyze->parsed()) {
      return run_analyze(kind, samples, margin_deg, seed, a_max, alpha_h_deg, k3, sphere_samples,
                         tilt_samples, out_dir);
    }
  } catch (const visplan::infeasible_error& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return 0;
}
