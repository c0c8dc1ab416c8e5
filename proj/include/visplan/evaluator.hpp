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

#ifndef VISPLAN_EVALUATOR_HPP_
#define VISPLAN_EVALUATOR_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "visplan/environment.hpp"
#include "visplan/frames.hpp"
#include "visplan/visibility.hpp"

namespace visplan {

/// Ground-truth frustum visibility: within sensing depth, in front of the
/// camera, and inside both the vertical and horizontal cone bands. All
/// boundaries are closed except the frontal hemisphere (theta2 < pi/2).
inline bool exact_visibility(const QuadKnotState& state, const Eigen::Vector3d& feature,
                             const FovSpec& fov) {
  const Eigen::Vector3d b = feature - state.position;
  const double r = b.norm();
  if (r <= 1e-9) {
    throw std::invalid_argument("exact_visibility: feature coincides with the state position");
  }
  if (r > fov.d_max) return false;
  const Eigen::Vector3d bh = b / r;
  const double theta1 = clamped_acos(state.n1.dot(bh));
  const double theta2 = clamped_acos(state.n2.dot(bh));
  const double theta3 = clamped_acos(state.n3.dot(bh));
  return theta2 < M_PI / 2.0 && std::abs(theta1 - M_PI / 2.0) <= fov.alpha_v / 2.0 &&
         std::abs(theta3 - M_PI / 2.0) <= fov.alpha_h / 2.0;
}

/// Fraction of dense spherical samples where the sigmoid model (thresholded
/// at 0.5) agrees with the exact frustum, after discarding samples within an
/// angular margin of any FoV boundary. Deterministic for a fixed seed.
inline double model_fidelity(const VisibilityParams& params, const FovSpec& fov,
                             int sample_count, double margin, std::uint64_t seed) {
  if (sample_count < 10000) {
    throw std::invalid_argument("model_fidelity: need at least 1e4 samples");
  }
  if (margin < 0.0) throw std::invalid_argument("model_fidelity: margin must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Random feasible state: moderate tilt, arbitrary yaw, level thrust balance.
  const double tilt = unit(rng) * (45.0 * M_PI / 180.0);
  const double azimuth = unit(rng) * 2.0 * M_PI;
  const double yaw = unit(rng) * 2.0 * M_PI - M_PI;
  const Eigen::Vector3d n1_target(std::sin(tilt) * std::cos(azimuth),
                                  std::sin(tilt) * std::sin(azimuth), std::cos(tilt));
  const double thrust = kGravity / std::cos(tilt);
  const QuadKnotState state = make_state(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                         thrust * n1_target + gravity_vector(), yaw);

  std::int64_t kept = 0, agreed = 0;
  for (int s = 0; s < sample_count; ++s) {
    const double z = 2.0 * unit(rng) - 1.0;
    const double phi = 2.0 * M_PI * unit(rng);
    const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d dir(rxy * std::cos(phi), rxy * std::sin(phi), z);
    const Eigen::Vector3d feature = state.position + 0.5 * fov.d_max * dir;

    const BearingAngles th = bearing_angles(state, feature);
    const double m1 = std::abs(fov.alpha_v / 2.0 - std::abs(th.theta1 - M_PI / 2.0));
    const double m2 = std::abs(th.theta2 - M_PI / 2.0);
    const double m3 = std::abs(fov.alpha_h / 2.0 - std::abs(th.theta3 - M_PI / 2.0));
    if (std::min({m1, m2, m3}) < margin) continue;
    ++kept;
    const bool model = visibility(state, feature, params) > 0.5;
    const bool exact = exact_visibility(state, feature, fov);
    if (model == exact) ++agreed;
  }
  return kept == 0 ? 1.0 : static_cast<double>(agreed) / static_cast<double>(kept);
}

struct ZetaGrid {
  int sphere_samples = 4096;  // Fibonacci sphere points
  int tilt_samples = 33;      // per tilt axis, inclusive of both ends
};

struct TiltSensitivityReport {
  double zeta = 0.0;       // fraction of samples with |v3 - v3'| > 0.5
  std::int64_t sample_count = 0;
  double a_max = 0.0;
  double alpha_h = 0.0;
  double eta_max = 0.0;    // arctan(a_max / g)
};

/// Measures how sensitive the horizontal visibility factor is to feasible
/// roll rotations: deterministic grid over bearing directions (Fibonacci
/// sphere) and tilt angles gamma, beta in [-eta_max, eta_max], counting
/// samples where the v3 value flips across 0.5 by more than 0.5.
inline TiltSensitivityReport tilt_sensitivity_zeta(double a_max, double alpha_h, double k3,
                                                   const ZetaGrid& grid = ZetaGrid{},
                                                   double gravity = kGravity) {
  if (a_max < 0.0) throw std::invalid_argument("tilt_sensitivity_zeta: a_max must be >= 0");
  const double eta_max = std::atan(a_max / gravity);
  const double sin_alpha3 = std::sin((M_PI - alpha_h) / 2.0);

  std::vector<double> tilts;
  if (eta_max == 0.0 || grid.tilt_samples <= 1) {
    tilts.push_back(0.0);
  } else {
    for (int i = 0; i < grid.tilt_samples; ++i) {
      tilts.push_back(-eta_max + 2.0 * eta_max * i / (grid.tilt_samples - 1));
    }
  }

  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  std::int64_t total = 0, flipped = 0;
  for (int i = 0; i < grid.sphere_samples; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / grid.sphere_samples;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    // Bearing components in the intermediate frame {n_y, n_3, n_y x n_3}.
    const double b2 = r * std::sin(phi);
    const double b3 = z;
    const double sin_theta3 = std::sqrt(std::max(0.0, 1.0 - b2 * b2));
    const double v3 = sigmoid(k3 * (sin_theta3 - sin_alpha3));
    for (double gamma : tilts) {
      const double cg = std::cos(gamma);
      for (double beta : tilts) {
        const double cb = std::cos(beta);
        const double sb = std::sin(beta);
        const double m = 1.0 / std::sqrt(cg * cg * cb * cb + sb * sb);
        const double proj = b2 * m * cg * cb + b3 * m * sb;
        const double sin_theta3p = std::sqrt(std::max(0.0, 1.0 - proj * proj));
        const double v3p = sigmoid(k3 * (sin_theta3p - sin_alpha3));
        ++total;
        if (std::abs(v3 - v3p) > 0.5) ++flipped;
      }
    }
  }

  TiltSensitivityReport report;
  report.zeta = static_cast<double>(flipped) / static_cast<double>(total);
  report.sample_count = total;
  report.a_max = a_max;
  report.alpha_h = alpha_h;
  report.eta_max = eta_max;
  return report;
}

/// Per-frame perception metrics of a finished trajectory, measured with the
/// exact visibility oracle at the camera frame rate.
struct PerceptionMetrics {
  std::vector<int> covisible_counts;    // per consecutive frame pair
  std::vector<double> max_parallax;     // radians, over the covisible features
  int min_count = 0;
  double mean_count = 0.0;
  int parallax_violations = 0;          // frame pairs with max parallax > rho_max
  double nu = 0.0;
  double rho_max = 0.0;
};

inline PerceptionMetrics trajectory_metrics(const UniformBSpline& position_curve,
                                            const UniformBSpline& yaw_curve,
                                            const Environment& env, const FovSpec& fov, double nu,
                                            double rho_max = 10.0 * M_PI / 180.0,
                                            double gravity = kGravity) {
  if (std::abs(yaw_curve.start_time() - position_curve.start_time()) > 1e-9 ||
      std::abs(yaw_curve.end_time() - position_curve.end_time()) > 1e-9) {
    throw std::invalid_argument("trajectory_metrics: curves cover different time domains");
  }
  if (!(nu > 0.0)) throw std::invalid_argument("trajectory_metrics: nu must be > 0");

  TrajectorySampler sampler(position_curve, yaw_curve, gravity_vector(gravity));
  std::vector<QuadKnotState> frames;
  const double t0 = sampler.start_time();
  const double t1 = sampler.end_time();
  for (int k = 0;; ++k) {
    const double t = t0 + k / nu;
    if (t > t1 + 1e-9) break;
    frames.push_back(sampler.state(std::min(t, t1)));
  }

  PerceptionMetrics metrics;
  metrics.nu = nu;
  metrics.rho_max = rho_max;
  const auto& features = env.features();
  for (size_t k = 0; k + 1 < frames.size(); ++k) {
    int count = 0;
    double worst = 0.0;
    for (const auto& f : features) {
      if (exact_visibility(frames[k], f, fov) && exact_visibility(frames[k + 1], f, fov)) {
        ++count;
        worst = std::max(worst, parallax(frames[k].position, frames[k + 1].position, f));
      }
    }
    metrics.covisible_counts.push_back(count);
    metrics.max_parallax.push_back(worst);
    if (worst > rho_max) ++metrics.parallax_violations;
  }

  if (!metrics.covisible_counts.empty()) {
    metrics.min_count = metrics.covisible_counts.front();
    double sum = 0.0;
    for (int c : metrics.covisible_counts) {
      metrics.min_count = std::min(metrics.min_count, c);
      sum += c;
    }
    metrics.mean_count = sum / metrics.covisible_counts.size();
  }
  return metrics;
}

}  // namespace visplan

#endif  // VISPLAN_EVALUATOR_HPP_
