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

#include <cmath>
#include <functional>
#include <random>

#include <catch_amalgamated.hpp>

#include "visplan/position_planner.hpp"

using visplan::Bounds;
using visplan::CostReport;
using visplan::Environment;
using visplan::FovSpec;
using visplan::PositionPlanConfig;
using visplan::UniformBSpline;

namespace {

FovSpec wide_fov() {
  FovSpec fov;
  fov.alpha_h = M_PI / 2.0;
  fov.alpha_v = M_PI / 3.0;
  fov.d_max = 8.0;
  return fov;
}

Environment env_with_features(std::vector<Eigen::Vector3d> features) {
  Bounds b{Eigen::Vector3d(-20, -20, -20), Eigen::Vector3d(20, 20, 20)};
  return Environment(b, std::move(features), {}, {});
}

// Cubic curve whose knots walk from `first` by `step` with zero acceleration
// everywhere (arithmetic control progression).
UniformBSpline linear_knot_curve(const Eigen::Vector3d& first, const Eigen::Vector3d& step,
                                 int n_ctrl, double dt) {
  Eigen::MatrixXd q(3, n_ctrl);
  const Eigen::Vector3d base = first - step;
  for (int c = 0; c < n_ctrl; ++c) q.col(c) = base + double(c) * step;
  return UniformBSpline(3, q, dt);
}

struct FdReport {
  Eigen::MatrixXd d_control_points;
  double d_knot_span;
};

FdReport fd_gradient(const std::function<double(const UniformBSpline&)>& cost,
                     const UniformBSpline& curve, double h = 1e-6) {
  FdReport out;
  const Eigen::MatrixXd q = curve.control_points();
  out.d_control_points = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (int c = 0; c < q.cols(); ++c) {
    for (int r = 0; r < q.rows(); ++r) {
      Eigen::MatrixXd qp = q, qm = q;
      qp(r, c) += h;
      qm(r, c) -= h;
      out.d_control_points(r, c) =
          (cost(UniformBSpline(curve.degree(), qp, curve.knot_span(), curve.start_time())) -
           cost(UniformBSpline(curve.degree(), qm, curve.knot_span(), curve.start_time()))) /
          (2 * h);
    }
  }
  out.d_knot_span =
      (cost(UniformBSpline(curve.degree(), q, curve.knot_span() + h, curve.start_time())) -
       cost(UniformBSpline(curve.degree(), q, curve.knot_span() - h, curve.start_time()))) /
      (2 * h);
  return out;
}

double grad_rel_error(const CostReport& report, const FdReport& fd) {
  const double diff_q =
      (report.d_control_points - fd.d_control_points).lpNorm<Eigen::Infinity>();
  const double diff_dt = std::abs(report.d_knot_span - fd.d_knot_span);
  const double scale = std::max({fd.d_control_points.lpNorm<Eigen::Infinity>(),
                                 std::abs(fd.d_knot_span), 1.0});
  return std::max(diff_q, diff_dt) / scale;
}

}  // namespace

TEST_CASE("vertical covisibility cost", "[position]") {
  const FovSpec fov = wide_fov();
  const double a1 = 10.0;

  SECTION("zero when every bearing stays inside the vertical band") {
    const auto curve =
        linear_knot_curve(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0.3, 0, 0), 8, 0.4);
    const auto env =
        env_with_features({Eigen::Vector3d(1.0, 2.0, 1.0), Eigen::Vector3d(2.0, -1.5, 1.0)});
    const auto report = visplan::cost_vertical_covisibility(curve, env, fov, a1);
    CHECK(report.cost == 0.0);
    CHECK(report.d_control_points.norm() == 0.0);
    CHECK(report.d_knot_span == 0.0);
  }

  SECTION("one knot offside by delta costs a1 delta^2") {
    const double delta = 2.0 * M_PI / 180.0;
    const double r = 1.0;
    // knots stacked vertically: the feature is level with the lower knot and
    // exactly delta past the band edge as seen from the upper knot
    const double h = r * std::tan(M_PI / 6.0 + delta);
    const auto curve =
        linear_knot_curve(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, h), 4, 0.5);
    const auto env = env_with_features({Eigen::Vector3d(r, 0, 1)});
    const auto report = visplan::cost_vertical_covisibility(curve, env, fov, a1);
    CHECK(report.cost == Catch::Approx(a1 * delta * delta).epsilon(1e-9));
  }

  SECTION("both knots offside by delta cost (1 + a1 d^2)^2 - 1") {
    const double delta = 3.0 * M_PI / 180.0;
    const double theta = (M_PI + M_PI / 3.0) / 2.0 + delta;
    Eigen::MatrixXd q(3, 4);
    for (int c = 0; c < 4; ++c) q.col(c) = Eigen::Vector3d(0, 0, 2);
    const UniformBSpline curve(3, q, 0.5);
    const auto env =
        env_with_features({Eigen::Vector3d(2.0 * std::sin(theta), 0, 2 + 2.0 * std::cos(theta))});
    const auto report = visplan::cost_vertical_covisibility(curve, env, fov, a1);
    const double g = a1 * delta * delta;
    CHECK(report.cost == Catch::Approx((1 + g) * (1 + g) - 1).epsilon(1e-9));
  }

  SECTION("gradient matches finite differences") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXd q(3, 7);
      const Eigen::Vector3d base(unit(rng) * 2, unit(rng) * 2, 1 + unit(rng));
      for (int c = 0; c < 7; ++c) {
        q.col(c) = base + Eigen::Vector3d(0.5 * c + 0.3 * unit(rng), 0.3 * unit(rng),
                                          0.4 * unit(rng));
      }
      const double dt = 0.25 + 0.5 * unit(rng);
      const UniformBSpline curve(3, q, dt);
      std::vector<Eigen::Vector3d> features;
      for (int f = 0; f < 6; ++f) {
        features.push_back(base + Eigen::Vector3d(unit(rng) * 4 - 1, unit(rng) * 6 - 3,
                                                  unit(rng) * 4 - 2));
      }
      const auto env = env_with_features(features);
      const auto report = visplan::cost_vertical_covisibility(curve, env, fov, a1);
      const auto fd = fd_gradient(
          [&](const UniformBSpline& c) {
            return visplan::cost_vertical_covisibility(c, env, fov, a1).cost;
          },
          curve);
      worst = std::max(worst, grad_rel_error(report, fd));
    }
    INFO("worst relative error " << worst);
    CHECK(worst < 1e-4);
  }

  SECTION("rigid scene translation leaves the cost unchanged") {
    const auto curve =
        linear_knot_curve(Eigen::Vector3d(0, 0, 2), Eigen::Vector3d(0.3, 0.1, 0.1), 7, 0.4);
    const std::vector<Eigen::Vector3d> features = {Eigen::Vector3d(1, 1, 4.2),
                                                   Eigen::Vector3d(2, -1, -0.5)};
    const auto base = visplan::cost_vertical_covisibility(curve, env_with_features(features),
                                                          fov, a1);
    const Eigen::Vector3d shift(3.0, -2.0, 1.5);
    std::vector<Eigen::Vector3d> shifted_features;
    for (const auto& f : features) shifted_features.push_back(f + shift);
    Eigen::MatrixXd q = curve.control_points();
    q.colwise() += shift;
    const UniformBSpline shifted_curve(3, q, curve.knot_span());
    const auto moved = visplan::cost_vertical_covisibility(
        shifted_curve, env_with_features(shifted_features), fov, a1);
    CHECK(std::abs(base.cost - moved.cost) < 1e-9);
  }
}

TEST_CASE("parallax cost", "[position]") {
  const FovSpec fov = wide_fov();
  PositionPlanConfig config;
  config.nu = 20.0;
  config.rho_max = 10.0 * M_PI / 180.0;
  config.a2 = 20.0;

  SECTION("zero when all pair parallax stays under the threshold") {
    // slow, far geometry: features 6 m away, knots 0.1 m apart
    const auto curve =
        linear_knot_curve(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0.1, 0, 0), 8, 0.4);
    const auto env = env_with_features({Eigen::Vector3d(1.5, 6.0, 1.0)});
    const auto report = visplan::cost_parallax(curve, env, fov, config);
    CHECK(report.cost == 0.0);
    CHECK(report.d_knot_span == 0.0);
  }

  SECTION("single violating pair matches the scalar formula") {
    const double dt = 0.1;
    const double rho_thr = config.nu * config.rho_max * dt;
    const double rho = rho_thr + 0.05;
    // both knots level with the feature (theta1 = 90 deg) and separated by
    // the arc that subtends exactly rho at the feature
    const Eigen::Vector3d f(0, 0, 1);
    const double radius = 2.0;
    const Eigen::Vector3d p0 = f + radius * Eigen::Vector3d(1, 0, 0);
    const Eigen::Vector3d p1 = f + radius * Eigen::Vector3d(std::cos(rho), std::sin(rho), 0);
    const auto curve = linear_knot_curve(p0, p1 - p0, 4, dt);
    const auto env = env_with_features({f});
    const auto report = visplan::cost_parallax(curve, env, fov, config);
    const double w = 1.0 / (1.0 + std::exp(-60.0 * (1.0 - std::sin((M_PI - 0.8 * fov.alpha_v) / 2.0))));
    CHECK(report.cost == Catch::Approx(w * config.a2 * 0.05 * 0.05).epsilon(1e-6));
  }

  SECTION("coincident adjacent knots have zero parallax cost") {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3, 6);
    for (int c = 0; c < 6; ++c) q.col(c) = Eigen::Vector3d(1, 1, 1);
    const UniformBSpline curve(3, q, 0.2);
    const auto env = env_with_features({Eigen::Vector3d(2, 2, 1)});
    CHECK(visplan::cost_parallax(curve, env, fov, config).cost == 0.0);
  }

  SECTION("gradient matches finite differences with frozen weights") {
    std::mt19937 rng(4711);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXd q(3, 6);
      const Eigen::Vector3d base(unit(rng), unit(rng), 1 + unit(rng));
      for (int c = 0; c < 6; ++c) {
        q.col(c) = base + Eigen::Vector3d(0.8 * c, 0.5 * unit(rng), 0.3 * unit(rng));
      }
      const double dt = 0.1 + 0.1 * unit(rng);  // small dt makes violations common
      const UniformBSpline curve(3, q, dt);
      std::vector<Eigen::Vector3d> features;
      for (int f = 0; f < 5; ++f) {
        features.push_back(base +
                           Eigen::Vector3d(unit(rng) * 4, 0.5 + unit(rng) * 2, unit(rng) * 2 - 1));
      }
      const auto env = env_with_features(features);
      const auto frozen = visplan::parallax_weights(curve, env, fov);
      const auto report = visplan::cost_parallax(curve, env, fov, config, &frozen);
      if (report.cost == 0.0) continue;
      const auto fd = fd_gradient(
          [&](const UniformBSpline& c) {
            return visplan::cost_parallax(c, env, fov, config, &frozen).cost;
          },
          curve);
      worst = std::max(worst, grad_rel_error(report, fd));
    }
    INFO("worst relative error " << worst);
    CHECK(worst < 1e-4);
  }

  SECTION("pushing a knot to enlarge an offending parallax increases the cost") {
    const double dt = 0.1;
    const double rho = config.nu * config.rho_max * dt + 0.08;
    const Eigen::Vector3d f(0, 0, 1);
    const Eigen::Vector3d p0 = f + 2.0 * Eigen::Vector3d(1, 0, 0);
    const Eigen::Vector3d p1 = f + 2.0 * Eigen::Vector3d(std::cos(rho), std::sin(rho), 0);
    const auto curve = linear_knot_curve(p0, p1 - p0, 4, dt);
    const auto env = env_with_features({f});
    const double c0 = visplan::cost_parallax(curve, env, fov, config).cost;
    REQUIRE(c0 > 0.0);
    // rotate the second knot further around the feature
    const double rho2 = rho + 0.01;
    const Eigen::Vector3d p1b = f + 2.0 * Eigen::Vector3d(std::cos(rho2), std::sin(rho2), 0);
    const auto curve2 = linear_knot_curve(p0, p1b - p0, 4, dt);
    CHECK(visplan::cost_parallax(curve2, env, fov, config).cost > c0);
  }
}

TEST_CASE("smoothness cost", "[position]") {
  SECTION("collinear equally spaced control points have zero jerk") {
    const auto curve =
        linear_knot_curve(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 2, 3), 8, 0.5);
    CHECK(visplan::cost_smoothness(curve).cost == Catch::Approx(0.0).margin(1e-18));
  }
  SECTION("quadratic control sequence has zero third difference") {
    Eigen::MatrixXd q(1, 5);
    q << 0, 1, 4, 9, 16;
    CHECK(visplan::cost_smoothness(UniformBSpline(3, q, 1.0)).cost ==
          Catch::Approx(0.0).margin(1e-18));
  }
  SECTION("unit third difference integrates to one") {
    Eigen::MatrixXd q(1, 4);
    q << 0, 0, 0, 1;
    CHECK(visplan::cost_smoothness(UniformBSpline(3, q, 1.0)).cost ==
          Catch::Approx(1.0).margin(1e-15));
  }
  SECTION("gradient matches finite differences") {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::MatrixXd q(3, 8);
      for (int c = 0; c < 8; ++c) q.col(c) = Eigen::Vector3d(coord(rng), coord(rng), coord(rng));
      const UniformBSpline curve(3, q, 0.3);
      const auto report = visplan::cost_smoothness(curve);
      const auto fd = fd_gradient(
          [&](const UniformBSpline& c) { return visplan::cost_smoothness(c).cost; }, curve);
      worst = std::max(worst, grad_rel_error(report, fd));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("safety cost", "[position]") {
  Bounds b{Eigen::Vector3d(-10, -10, -10), Eigen::Vector3d(10, 10, 10)};
  const Environment env(b, {}, {{Eigen::Vector3d(0, 0, 0), 1.0}}, {});
  const double d_safe = 0.5;

  SECTION("zero when every knot keeps its distance") {
    const auto curve =
        linear_knot_curve(Eigen::Vector3d(0, 4, 0), Eigen::Vector3d(0.3, 0, 0), 6, 0.4);
    CHECK(visplan::cost_safety(curve, env, d_safe).cost == 0.0);
  }
  SECTION("a knot at d_safe - 0.1 costs 0.01") {
    Eigen::MatrixXd q(3, 4);
    for (int c = 0; c < 4; ++c) q.col(c) = Eigen::Vector3d(1.4, 0, 0);  // clearance 0.4
    const UniformBSpline curve(3, q, 0.5);
    const auto report = visplan::cost_safety(curve, env, d_safe);
    // two knot points, both at clearance 0.4
    CHECK(report.cost == Catch::Approx(2 * 0.01).epsilon(1e-9));
    CHECK(report.d_knot_span == 0.0);
  }
  SECTION("gradient matches finite differences away from box edges") {
    const Environment env2(b, {},
                           {{Eigen::Vector3d(0, 0, 0), 1.0}, {Eigen::Vector3d(3, 2, 0), 0.8}}, {});
    std::mt19937 rng(66);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::MatrixXd q(3, 6);
      for (int c = 0; c < 6; ++c) {
        q.col(c) = Eigen::Vector3d(0.8 + 0.6 * c, 1.0 + unit(rng), unit(rng) - 0.5);
      }
      const UniformBSpline curve(3, q, 0.4);
      const auto report = visplan::cost_safety(curve, env2, 1.2);
      if (report.cost == 0.0) continue;
      const auto fd = fd_gradient(
          [&](const UniformBSpline& c) { return visplan::cost_safety(c, env2, 1.2).cost; },
          curve);
      worst = std::max(worst, grad_rel_error(report, fd));
    }
    INFO("worst relative error " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("time cost", "[position]") {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3, 7);
  const UniformBSpline curve(3, q, 0.5);
  const auto report = visplan::cost_time(curve);
  CHECK(report.cost == Catch::Approx(2.0).margin(1e-15));  // 4 spans x 0.5
  CHECK(report.d_knot_span == 4.0);
  CHECK(report.d_control_points.norm() == 0.0);
  const UniformBSpline doubled(3, q, 1.0);
  CHECK(visplan::cost_time(doubled).cost == Catch::Approx(4.0).margin(1e-15));
}

TEST_CASE("feasibility cost", "[position]") {
  const double v_max = 3.0;
  const double a_max = 100.0;  // keep acceleration hinges inactive unless wanted
  SECTION("hover curve is free") {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3, 6);
    CHECK(visplan::cost_feasibility(UniformBSpline(3, q, 0.5), v_max, a_max).cost == 0.0);
  }
  SECTION("one velocity control point over the per-axis limit") {
    const double v_lim = v_max / std::sqrt(3.0);
    const double a = v_lim + 0.2;
    const double bcomp = 0.5 * v_lim;
    Eigen::MatrixXd q(3, 4);
    q.setZero();
    q(0, 1) = a;
    q(0, 2) = a + bcomp;
    q(0, 3) = a + 2 * bcomp;
    const auto report = visplan::cost_feasibility(UniformBSpline(3, q, 1.0), v_max, a_max);
    CHECK(report.cost == Catch::Approx(0.04).epsilon(1e-9));
  }
  SECTION("shrinking the knot span never lowers the penalty") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> coord(-1.5, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::MatrixXd q(3, 6);
      for (int c = 0; c < 6; ++c) q.col(c) = Eigen::Vector3d(coord(rng), coord(rng), coord(rng));
      double prev = -1.0;
      for (double dt = 1.0; dt >= 0.1; dt -= 0.05) {
        const double cost = visplan::cost_feasibility(UniformBSpline(3, q, dt), 2.0, 2.0).cost;
        if (prev >= 0.0) CHECK(cost >= prev - 1e-12);
        prev = cost;
      }
    }
  }
  SECTION("gradient matches finite differences") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::MatrixXd q(3, 6);
      for (int c = 0; c < 6; ++c) q.col(c) = Eigen::Vector3d(coord(rng), coord(rng), coord(rng));
      const UniformBSpline curve(3, q, 0.35);
      const auto report = visplan::cost_feasibility(curve, 2.0, 6.0);
      if (report.cost == 0.0) continue;
      const auto fd = fd_gradient(
          [&](const UniformBSpline& c) { return visplan::cost_feasibility(c, 2.0, 6.0).cost; },
          curve);
      worst = std::max(worst, grad_rel_error(report, fd));
    }
    INFO("worst relative error " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("optimize_position", "[position]") {
  SECTION("perception weights off in an empty corridor stays near the straight line") {
    Bounds b{Eigen::Vector3d(-10, -3, 0), Eigen::Vector3d(10, 3, 3)};
    const Environment env(b, {}, {}, {}, 0.2);
    PositionPlanConfig config;
    config.lambda_vc = 0.0;
    config.lambda_para = 0.0;
    config.v_max = 2.0;
    config.a_max = 2.5;
    config.d_safe = 0.4;
    config.max_iterations = 150;
    visplan::EndpointState start, goal;
    start.position = Eigen::Vector3d(-7, 0, 1.5);
    goal.position = Eigen::Vector3d(7, 0, 1.5);
    const FovSpec fov = wide_fov();
    const auto params = visplan::VisibilityParams::for_fov(fov);
    const auto result = visplan::optimize_position(env, start, goal, fov, params, config);

    for (const auto& p : result.curve.knot_points()) {
      CHECK(std::abs(p(1)) < 0.05);
      CHECK(std::abs(p(2) - 1.5) < 0.05);
    }
    CHECK(result.trace.final_cost <= result.trace.initial_cost);
    // the fixed boundary control points never move (bitwise)
    const auto& q = result.curve.control_points();
    const auto& q0 = result.initial_curve.control_points();
    const int n = static_cast<int>(q.cols());
    for (int c : {0, 1, 2, n - 3, n - 2, n - 1}) {
      CHECK(q.col(c) == q0.col(c));
    }
    // endpoints and boundary velocities survive
    CHECK((result.curve.knot_points().front() - start.position).norm() < 1e-6);
    CHECK((result.curve.knot_points().back() - goal.position).norm() < 1e-6);
    const auto vel = result.curve.derivative();
    CHECK(vel.eval(vel.start_time()).norm() < 1e-6);
    CHECK(vel.eval(vel.end_time()).norm() < 1e-6);
  }

  SECTION("best-iterate contract on a perception-weighted run") {
    Bounds b{Eigen::Vector3d(-10, -3, 0), Eigen::Vector3d(10, 3, 3)};
    std::vector<Eigen::Vector3d> features;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 30; ++i) {
      features.push_back(Eigen::Vector3d(-4 + 8 * unit(rng), 2.0 + unit(rng), 0.5 + 2 * unit(rng)));
    }
    const Environment env(b, features, {}, {}, 0.2);
    PositionPlanConfig config;
    config.v_max = 2.0;
    config.max_iterations = 60;
    visplan::EndpointState start, goal;
    start.position = Eigen::Vector3d(-6, 0, 1.5);
    goal.position = Eigen::Vector3d(6, 0, 1.5);
    const FovSpec fov = wide_fov();
    const auto params = visplan::VisibilityParams::for_fov(fov);
    const auto result = visplan::optimize_position(env, start, goal, fov, params, config);
    CHECK(result.trace.final_cost <= result.trace.initial_cost);
    CHECK(result.trace.iterations.size() >= 2);
  }
}
