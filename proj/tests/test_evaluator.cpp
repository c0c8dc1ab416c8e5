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
#include <random>

#include <catch_amalgamated.hpp>

#include "visplan/evaluator.hpp"

using visplan::Bounds;
using visplan::Environment;
using visplan::FovSpec;
using visplan::QuadKnotState;
using visplan::UniformBSpline;
using visplan::VisibilityParams;

namespace {

FovSpec paper_fov() {
  FovSpec fov;
  fov.alpha_h = M_PI / 2.0;
  fov.alpha_v = M_PI / 3.0;
  fov.d_max = 8.0;
  return fov;
}

QuadKnotState hover_state(double yaw = 0.0) {
  return visplan::make_state(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                             Eigen::Vector3d::Zero(), yaw);
}

QuadKnotState random_state(std::mt19937& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double tilt = unit(rng) * (55.0 * M_PI / 180.0);
  const double azimuth = unit(rng) * 2.0 * M_PI;
  const Eigen::Vector3d n1(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth),
                           std::cos(tilt));
  const Eigen::Vector3d accel =
      (visplan::kGravity / std::cos(tilt)) * n1 + visplan::gravity_vector();
  return visplan::make_state(Eigen::Vector3d(unit(rng), unit(rng), unit(rng)),
                             Eigen::Vector3d::Zero(), accel, unit(rng) * 2 * M_PI - M_PI);
}

}  // namespace

TEST_CASE("exact_visibility", "[evaluator]") {
  const FovSpec fov = paper_fov();
  SECTION("on-axis feature at half depth") {
    const QuadKnotState s = hover_state();
    CHECK(visplan::exact_visibility(s, Eigen::Vector3d(fov.d_max / 2, 0, 0), fov));
  }
  SECTION("feature behind the camera") {
    const QuadKnotState s = hover_state();
    CHECK_FALSE(visplan::exact_visibility(s, Eigen::Vector3d(-2, 0, 0), fov));
  }
  SECTION("feature beyond the sensing depth") {
    const QuadKnotState s = hover_state();
    CHECK_FALSE(visplan::exact_visibility(s, Eigen::Vector3d(fov.d_max + 0.5, 0, 0), fov));
  }
  SECTION("the vertical boundary is closed") {
    // construct alpha_v so that the boundary comparison is an exact tie
    const QuadKnotState s = hover_state();
    const Eigen::Vector3d dir =
        std::sin(2.0 * M_PI / 3.0) * s.n2 + std::cos(2.0 * M_PI / 3.0) * s.n1;
    const Eigen::Vector3d feature = s.position + 2.0 * dir;
    const double theta1 = std::acos(s.n1.dot((feature - s.position).normalized()));
    FovSpec tight = fov;
    tight.alpha_v = 2.0 * std::abs(theta1 - M_PI / 2.0);
    CHECK(visplan::exact_visibility(s, feature, tight));
  }
  SECTION("zero bearing is rejected") {
    const QuadKnotState s = hover_state();
    CHECK_THROWS_AS(visplan::exact_visibility(s, s.position, fov), std::invalid_argument);
  }
  SECTION("agrees with the theta-free componentwise tangent test") {
    std::mt19937 rng(5150);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100000; ++trial) {
      const QuadKnotState s = random_state(rng);
      Eigen::Vector3d dir(unit(rng) * 2 - 1, unit(rng) * 2 - 1, unit(rng) * 2 - 1);
      if (dir.norm() < 1e-3) continue;
      dir.normalize();
      const Eigen::Vector3d f = s.position + (0.2 + unit(rng) * 9.0) * dir;
      const Eigen::Vector3d b = f - s.position;
      const double x = b.dot(s.n2);  // forward
      const double y = b.dot(s.n3);  // lateral
      const double z = b.dot(s.n1);  // vertical
      const bool oracle = b.norm() <= fov.d_max && x > 0.0 &&
                          std::abs(z) <= std::tan(fov.alpha_v / 2.0) * std::hypot(x, y) &&
                          std::abs(y) <= std::tan(fov.alpha_h / 2.0) * std::hypot(x, z);
      CHECK(visplan::exact_visibility(s, f, fov) == oracle);
    }
  }
}

TEST_CASE("model_fidelity", "[evaluator]") {
  const FovSpec fov = paper_fov();
  SECTION("near-step sigmoids agree everywhere outside a small margin") {
    const auto steep = VisibilityParams::for_fov(fov, 4000.0, 1000.0, 2000.0);
    const double agreement =
        visplan::model_fidelity(steep, fov, 100000, 1.0 * M_PI / 180.0, 99);
    CHECK(agreement == 1.0);
  }
  SECTION("published steepnesses reach 99 percent at a 3 degree margin") {
    const auto params = VisibilityParams::for_fov(fov, 40.0, 10.0, 20.0);
    const double agreement =
        visplan::model_fidelity(params, fov, 100000, 3.0 * M_PI / 180.0, 7);
    CHECK(agreement >= 0.99);
  }
  SECTION("removing the margin strictly lowers the agreement") {
    const auto params = VisibilityParams::for_fov(fov, 40.0, 10.0, 20.0);
    const double with_margin =
        visplan::model_fidelity(params, fov, 100000, 3.0 * M_PI / 180.0, 7);
    const double without = visplan::model_fidelity(params, fov, 100000, 0.0, 7);
    CHECK(without < with_margin);
  }
  SECTION("deterministic for a fixed seed") {
    const auto params = VisibilityParams::for_fov(fov);
    const double a = visplan::model_fidelity(params, fov, 20000, 0.01, 1234);
    const double b = visplan::model_fidelity(params, fov, 20000, 0.01, 1234);
    CHECK(a == b);
  }
  SECTION("too few samples are rejected") {
    const auto params = VisibilityParams::for_fov(fov);
    CHECK_THROWS_AS(visplan::model_fidelity(params, fov, 100, 0.0, 1), std::invalid_argument);
  }
}

TEST_CASE("tilt_sensitivity_zeta", "[evaluator]") {
  SECTION("no acceleration means no flips") {
    const auto report = visplan::tilt_sensitivity_zeta(0.0, M_PI / 2.0, 20.0);
    CHECK(report.zeta == 0.0);
    CHECK(report.eta_max == 0.0);
  }
  SECTION("published operating point") {
    const auto report = visplan::tilt_sensitivity_zeta(2.5, M_PI / 2.0, 20.0);
    CHECK(report.eta_max == Catch::Approx(std::atan(2.5 / 9.81)).margin(1e-12));
    CHECK(report.zeta >= 0.0151);
    CHECK(report.zeta <= 0.0211);
  }
  SECTION("a near-step sigmoid flips more boundary samples") {
    const auto soft = visplan::tilt_sensitivity_zeta(2.5, M_PI / 2.0, 20.0);
    const auto hard = visplan::tilt_sensitivity_zeta(2.5, M_PI / 2.0, 2000.0);
    CHECK(hard.zeta > soft.zeta);
  }
  SECTION("monotone nondecreasing in the acceleration limit") {
    visplan::ZetaGrid grid;
    grid.sphere_samples = 1024;
    grid.tilt_samples = 17;
    double prev = -1.0;
    for (double a_max = 0.0; a_max <= 5.01; a_max += 0.5) {
      const auto r = visplan::tilt_sensitivity_zeta(a_max, M_PI / 2.0, 20.0, grid);
      CHECK(r.zeta >= prev - 1e-12);
      prev = r.zeta;
    }
  }
  SECTION("grid refinement is stable") {
    visplan::ZetaGrid coarse;
    coarse.sphere_samples = 2048;
    coarse.tilt_samples = 23;
    const auto a = visplan::tilt_sensitivity_zeta(2.5, M_PI / 2.0, 20.0, coarse);
    const auto b = visplan::tilt_sensitivity_zeta(2.5, M_PI / 2.0, 20.0);
    CHECK(std::abs(a.zeta - b.zeta) < 0.0005);
  }
}

TEST_CASE("trajectory_metrics", "[evaluator]") {
  const FovSpec fov = paper_fov();
  SECTION("no features means zero counts") {
    Eigen::MatrixXd q(3, 6);
    for (int c = 0; c < 6; ++c) q.col(c) = Eigen::Vector3d(0.2 * c, 0, 1);
    const UniformBSpline pos(3, q, 0.5);
    Eigen::MatrixXd yq = Eigen::MatrixXd::Zero(1, 6);
    const UniformBSpline yaw(3, yq, 0.5);
    Bounds b{Eigen::Vector3d(-10, -10, -10), Eigen::Vector3d(10, 10, 10)};
    const Environment env(b, {}, {}, {});
    const auto m = visplan::trajectory_metrics(pos, yaw, env, fov, 20.0);
    CHECK(m.min_count == 0);
    CHECK(m.mean_count == 0.0);
    CHECK(m.parallax_violations == 0);
    CHECK(m.covisible_counts.size() == m.max_parallax.size());
  }
  SECTION("stationary hover facing a cluster sees all of it with zero parallax") {
    Eigen::MatrixXd q(3, 6);
    for (int c = 0; c < 6; ++c) q.col(c) = Eigen::Vector3d(0, 0, 1);
    const UniformBSpline pos(3, q, 0.5);
    Eigen::MatrixXd yq = Eigen::MatrixXd::Zero(1, 6);
    const UniformBSpline yaw(3, yq, 0.5);
    std::vector<Eigen::Vector3d> features;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
      features.push_back(Eigen::Vector3d(2.0 + unit(rng), unit(rng) - 0.5, 0.8 + 0.4 * unit(rng)));
    }
    Bounds b{Eigen::Vector3d(-10, -10, -10), Eigen::Vector3d(10, 10, 10)};
    const Environment env(b, features, {}, {});
    const auto m = visplan::trajectory_metrics(pos, yaw, env, fov, 20.0);
    REQUIRE(!m.covisible_counts.empty());
    for (int c : m.covisible_counts) CHECK(c == 10);
    for (double p : m.max_parallax) CHECK(p == 0.0);
    CHECK(m.min_count == 10);
    CHECK(m.mean_count == 10.0);
    // expected frame count: duration / frame interval + 1, pairs = frames - 1
    CHECK(m.covisible_counts.size() == static_cast<size_t>(pos.duration() * 20.0));
  }
  SECTION("parallax series is yaw independent for features retained in both runs") {
    Eigen::MatrixXd q(3, 7);
    for (int c = 0; c < 7; ++c) q.col(c) = Eigen::Vector3d(0.3 * c, 0, 1);
    const UniformBSpline pos(3, q, 0.4);
    Eigen::MatrixXd y0 = Eigen::MatrixXd::Zero(1, 7);
    Eigen::MatrixXd y1 = Eigen::MatrixXd::Constant(1, 7, 0.2);
    const UniformBSpline yaw0(3, y0, 0.4);
    const UniformBSpline yaw1(3, y1, 0.4);
    std::vector<Eigen::Vector3d> features = {Eigen::Vector3d(3.0, 0.2, 1.0)};
    Bounds b{Eigen::Vector3d(-10, -10, -10), Eigen::Vector3d(10, 10, 10)};
    const Environment env(b, features, {}, {});
    const auto m0 = visplan::trajectory_metrics(pos, yaw0, env, fov, 20.0);
    const auto m1 = visplan::trajectory_metrics(pos, yaw1, env, fov, 20.0);
    REQUIRE(m0.max_parallax.size() == m1.max_parallax.size());
    for (size_t i = 0; i < m0.max_parallax.size(); ++i) {
      // with the single feature visible in both runs the parallax is bitwise
      // identical; counts may differ
      if (m0.covisible_counts[i] == 1 && m1.covisible_counts[i] == 1) {
        CHECK(m0.max_parallax[i] == m1.max_parallax[i]);
      }
    }
  }
  SECTION("mismatched domains are rejected") {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3, 6);
    const UniformBSpline pos(3, q, 0.5);
    Eigen::MatrixXd yq = Eigen::MatrixXd::Zero(1, 6);
    const UniformBSpline yaw(3, yq, 0.4);
    Bounds b{Eigen::Vector3d(-10, -10, -10), Eigen::Vector3d(10, 10, 10)};
    const Environment env(b, {}, {}, {});
    CHECK_THROWS_AS(visplan::trajectory_metrics(pos, yaw, env, fov, 20.0),
                    std::invalid_argument);
  }
}
