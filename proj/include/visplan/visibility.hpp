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

#ifndef VISPLAN_VISIBILITY_HPP_
#define VISPLAN_VISIBILITY_HPP_

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "visplan/frames.hpp"

namespace visplan {

/// Camera field of view: horizontal/vertical angles of view plus sensing depth.
struct FovSpec {
  double alpha_h = M_PI / 2.0;  // radians
  double alpha_v = M_PI / 3.0;  // radians
  double d_max = 8.0;           // meters

  void validate() const {
    if (!(alpha_h > 0.0 && alpha_h < M_PI)) throw std::invalid_argument("FovSpec: alpha_h out of (0, pi)");
    if (!(alpha_v > 0.0 && alpha_v < M_PI)) throw std::invalid_argument("FovSpec: alpha_v out of (0, pi)");
    if (!(d_max > 0.0)) throw std::invalid_argument("FovSpec: d_max must be > 0");
  }
};

/// Sigmoid steepnesses and threshold angles of the differentiable visibility
/// model. The thresholds are tied to the FoV: alpha1 = (pi - alpha_v)/2,
/// alpha2 = pi/2, alpha3 = (pi - alpha_h)/2.
struct VisibilityParams {
  double k1 = 40.0;
  double k2 = 10.0;
  double k3 = 20.0;
  double alpha1 = (M_PI - M_PI / 3.0) / 2.0;
  double alpha2 = M_PI / 2.0;
  double alpha3 = (M_PI - M_PI / 2.0) / 2.0;
  // Precomputed sigmoid thresholds. cos(alpha2) is identically zero since
  // alpha2 is pinned to pi/2; spelling it out keeps the half-visibility point
  // exact instead of inheriting cos(pi/2) rounding.
  double sin_alpha1 = std::sin((M_PI - M_PI / 3.0) / 2.0);
  double cos_alpha2 = 0.0;
  double sin_alpha3 = std::sin((M_PI - M_PI / 2.0) / 2.0);

  static VisibilityParams for_fov(const FovSpec& fov, double k1 = 40.0, double k2 = 10.0,
                                  double k3 = 20.0) {
    fov.validate();
    if (!(k1 > 0.0 && k2 > 0.0 && k3 > 0.0)) {
      throw std::invalid_argument("VisibilityParams: steepnesses must be > 0");
    }
    VisibilityParams p;
    p.k1 = k1;
    p.k2 = k2;
    p.k3 = k3;
    p.alpha1 = (M_PI - fov.alpha_v) / 2.0;
    p.alpha2 = M_PI / 2.0;
    p.alpha3 = (M_PI - fov.alpha_h) / 2.0;
    p.sin_alpha1 = std::sin(p.alpha1);
    p.cos_alpha2 = 0.0;
    p.sin_alpha3 = std::sin(p.alpha3);
    return p;
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double clamped_acos(double x) { return std::acos(std::min(1.0, std::max(-1.0, x))); }

struct BearingAngles {
  double theta1;  // angle to thrust direction n1
  double theta2;  // angle to optical axis n2
  double theta3;  // angle to lateral axis n3
};

/// Angles between the bearing vector b = f - p and the state frame axes,
/// each in [0, pi].
inline BearingAngles bearing_angles(const QuadKnotState& state, const Eigen::Vector3d& feature) {
  const Eigen::Vector3d b = feature - state.position;
  const double norm = b.norm();
  if (norm <= 1e-9) {
    throw std::invalid_argument("bearing_angles: feature coincides with the state position");
  }
  const Eigen::Vector3d bh = b / norm;
  return {clamped_acos(state.n1.dot(bh)), clamped_acos(state.n2.dot(bh)),
          clamped_acos(state.n3.dot(bh))};
}

/// Differentiable visibility v = v1(theta1) * v3(theta3) * v2(theta2); each
/// factor is a sigmoid approximation of the corresponding FoV step function.
inline double visibility(const QuadKnotState& state, const Eigen::Vector3d& feature,
                         const VisibilityParams& params) {
  const Eigen::Vector3d b = feature - state.position;
  const double norm = b.norm();
  if (norm <= 1e-9) {
    throw std::invalid_argument("visibility: feature coincides with the state position");
  }
  const Eigen::Vector3d bh = b / norm;
  const double s1 = state.n1.cross(bh).norm();
  const double s3 = state.n3.cross(bh).norm();
  const double c2 = state.n2.dot(bh);
  const double v1 = sigmoid(params.k1 * (s1 - params.sin_alpha1));
  const double v3 = sigmoid(params.k3 * (s3 - params.sin_alpha3));
  const double v2 = sigmoid(params.k2 * (c2 - params.cos_alpha2));
  return v1 * v3 * v2;
}

/// Covisibility measure mu = sum_j v(s1, f_j) v(s2, f_j) over a feature set
/// that the caller has already filtered to lie within FoV depth of both.
inline double covisibility(const QuadKnotState& s1, const QuadKnotState& s2,
                           std::span<const Eigen::Vector3d> features,
                           const VisibilityParams& params) {
  double mu = 0.0;
  for (const auto& f : features) {
    mu += visibility(s1, f, params) * visibility(s2, f, params);
  }
  return mu;
}

/// Parallax angle at a feature between two camera positions. Independent of
/// yaw by construction: only positions enter.
inline double parallax(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2,
                       const Eigen::Vector3d& feature) {
  const Eigen::Vector3d r1 = p1 - feature;
  const Eigen::Vector3d r2 = p2 - feature;
  const double n1 = r1.norm();
  const double n2 = r2.norm();
  if (n1 <= 1e-9 || n2 <= 1e-9) {
    throw std::invalid_argument("parallax: feature coincides with a camera position");
  }
  return clamped_acos(r1.dot(r2) / (n1 * n2));
}

/// Constant parallax weight v1'(theta1): a steeper sigmoid (k1' = 60) with a
/// narrowed band alpha1' = (pi - 0.8 alpha_v)/2, discounting features near the
/// vertical FoV boundary.
inline double v1_prime_weight(double theta1, double alpha_v) {
  const double alpha1p = (M_PI - 0.8 * alpha_v) / 2.0;
  return sigmoid(60.0 * (std::sin(theta1) - std::sin(alpha1p)));
}

/// Value and gradients of the visibility model with respect to the state's
/// position, acceleration and yaw, with frames recomputed from those inputs.
struct VisibilityGradient {
  double value = 0.0;
  double v1 = 0.0, v2 = 0.0, v3 = 0.0;
  Eigen::Vector3d d_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_acceleration = Eigen::Vector3d::Zero();
  double d_yaw = 0.0;
};

namespace detail {

/// Shared chain-rule quantities of the frame construction at one state.
/// All sensitivities are with respect to (position, acceleration, yaw).
struct FrameChain {
  Eigen::Vector3d b_hat;
  double b_norm;
  Eigen::Vector3d n1, n2, n3, ny;
  double thrust_norm;  // |a - g|
  double cross_norm;   // |n1 x ny|
  Eigen::Vector3d dny_dyaw;

  FrameChain(const QuadKnotState& state, const Eigen::Vector3d& feature,
             const Eigen::Vector3d& gravity) {
    const Eigen::Vector3d b = feature - state.position;
    b_norm = b.norm();
    if (b_norm <= 1e-9) {
      throw std::invalid_argument("visibility_grad: feature coincides with the state position");
    }
    b_hat = b / b_norm;
    const Eigen::Vector3d f = state.acceleration - gravity;
    thrust_norm = f.norm();
    if (thrust_norm <= kFrameEpsilon) {
      throw std::domain_error("visibility_grad: free-fall state");
    }
    n1 = f / thrust_norm;
    ny = yaw_dir(state.yaw);
    const Eigen::Vector3d cross = n1.cross(ny);
    cross_norm = cross.norm();
    if (cross_norm <= kFrameEpsilon) {
      throw std::domain_error("visibility_grad: degenerate frame (n1 parallel to ny)");
    }
    n3 = cross / cross_norm;
    n2 = n3.cross(n1);
    dny_dyaw = Eigen::Vector3d(-std::sin(state.yaw), std::cos(state.yaw), 0.0);
  }

  // d b_hat / d position applied as an adjoint: returns grad_p of (w . b_hat).
  Eigen::Vector3d bhat_adjoint(const Eigen::Vector3d& w) const {
    return -(w - b_hat * b_hat.dot(w)) / b_norm;
  }
  // d n1 / d acceleration adjoint.
  Eigen::Vector3d n1_adjoint(const Eigen::Vector3d& w) const {
    return (w - n1 * n1.dot(w)) / thrust_norm;
  }
  // d n3 / d c adjoint with c = n1 x ny.
  Eigen::Vector3d n3_from_cross_adjoint(const Eigen::Vector3d& w) const {
    return (w - n3 * n3.dot(w)) / cross_norm;
  }
};

}  // namespace detail

/// Analytic gradient of the full visibility product; matches central finite
/// differences away from frame and bearing degeneracies.
inline VisibilityGradient visibility_grad(const QuadKnotState& state,
                                          const Eigen::Vector3d& feature,
                                          const VisibilityParams& params,
                                          const Eigen::Vector3d& gravity = gravity_vector()) {
  const detail::FrameChain fc(state, feature, gravity);

  // sin(theta1) = |n1 x b_hat|, sin(theta3) = |n3 x b_hat|, cos(theta2) = n2 . b_hat
  const Eigen::Vector3d c1 = fc.n1.cross(fc.b_hat);
  const Eigen::Vector3d c3 = fc.n3.cross(fc.b_hat);
  const double s1 = c1.norm();
  const double s3 = c3.norm();
  const double c2 = fc.n2.dot(fc.b_hat);

  const double v1 = sigmoid(params.k1 * (s1 - params.sin_alpha1));
  const double v3 = sigmoid(params.k3 * (s3 - params.sin_alpha3));
  const double v2 = sigmoid(params.k2 * (c2 - params.cos_alpha2));

  VisibilityGradient out;
  out.value = v1 * v3 * v2;
  out.v1 = v1;
  out.v2 = v2;
  out.v3 = v3;

  // Sensitivities of s1: grad wrt n1 is b_hat x c1_hat, wrt b_hat is c1_hat x n1.
  Eigen::Vector3d s1_d_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d s1_d_acc = Eigen::Vector3d::Zero();
  if (s1 > 1e-12) {
    const Eigen::Vector3d c1h = c1 / s1;
    s1_d_pos = fc.bhat_adjoint(c1h.cross(fc.n1));
    s1_d_acc = fc.n1_adjoint(fc.b_hat.cross(c1h));
  }

  // Sensitivities of s3 through n3 = (n1 x ny)/|n1 x ny|.
  Eigen::Vector3d s3_d_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d s3_d_acc = Eigen::Vector3d::Zero();
  double s3_d_yaw = 0.0;
  Eigen::Vector3d g3 = Eigen::Vector3d::Zero();  // grad of s3 wrt the raw cross product c
  if (s3 > 1e-12) {
    const Eigen::Vector3d c3h = c3 / s3;
    s3_d_pos = fc.bhat_adjoint(c3h.cross(fc.n3));
    g3 = fc.n3_from_cross_adjoint(fc.b_hat.cross(c3h));
    s3_d_acc = fc.n1_adjoint(fc.ny.cross(g3));
    s3_d_yaw = g3.dot(fc.n1.cross(fc.dny_dyaw));
  }

  // Sensitivities of c2 = (n3 x n1) . b_hat. Both the direct n1 path and the
  // n3(n1, ny) path contribute.
  const Eigen::Vector3d c2_d_pos = fc.bhat_adjoint(fc.n2);
  const Eigen::Vector3d dn3_target = fc.n3_from_cross_adjoint(fc.n1.cross(fc.b_hat));
  const Eigen::Vector3d c2_d_n1_total = fc.b_hat.cross(fc.n3) + fc.ny.cross(dn3_target);
  const Eigen::Vector3d c2_d_acc = fc.n1_adjoint(c2_d_n1_total);
  const double c2_d_yaw = dn3_target.dot(fc.n1.cross(fc.dny_dyaw));

  const double w1 = v1 * (1.0 - v1) * params.k1;
  const double w3 = v3 * (1.0 - v3) * params.k3;
  const double w2 = v2 * (1.0 - v2) * params.k2;

  out.d_position = w1 * s1_d_pos * (v3 * v2) + w3 * s3_d_pos * (v1 * v2) + w2 * c2_d_pos * (v1 * v3);
  out.d_acceleration =
      w1 * s1_d_acc * (v3 * v2) + w3 * s3_d_acc * (v1 * v2) + w2 * c2_d_acc * (v1 * v3);
  out.d_yaw = w3 * s3_d_yaw * (v1 * v2) + w2 * c2_d_yaw * (v1 * v3);
  return out;
}

/// theta1 = arccos(n1 . b_hat) and its gradients with respect to the state
/// position and acceleration; used by the vertical covisibility cost.
struct Theta1Gradient {
  double theta1 = 0.0;
  Eigen::Vector3d d_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_acceleration = Eigen::Vector3d::Zero();
};

inline Theta1Gradient theta1_grad(const Eigen::Vector3d& position,
                                  const Eigen::Vector3d& acceleration,
                                  const Eigen::Vector3d& feature,
                                  const Eigen::Vector3d& gravity = gravity_vector()) {
  const Eigen::Vector3d b = feature - position;
  const double b_norm = b.norm();
  if (b_norm <= 1e-9) {
    throw std::invalid_argument("theta1_grad: feature coincides with the position");
  }
  const Eigen::Vector3d bh = b / b_norm;
  const Eigen::Vector3d f = acceleration - gravity;
  const double f_norm = f.norm();
  if (f_norm <= kFrameEpsilon) throw std::domain_error("theta1_grad: free-fall state");
  const Eigen::Vector3d n1 = f / f_norm;

  Theta1Gradient out;
  const double u = std::min(1.0, std::max(-1.0, n1.dot(bh)));
  out.theta1 = std::acos(u);
  const double s = std::sqrt(std::max(1.0 - u * u, 0.0));
  if (s > 1e-9) {
    const double dacos = -1.0 / s;
    // grad_p u = -(I - bh bh^T) n1 / |b|, grad_a u = (I - n1 n1^T) bh / |a - g|
    out.d_position = dacos * (-(n1 - bh * u) / b_norm);
    out.d_acceleration = dacos * ((bh - n1 * u) / f_norm);
  }
  return out;
}

/// v3 factor at a state together with its yaw derivative; the yaw-stage
/// objective only differentiates this factor.
struct V3YawGradient {
  double v3 = 0.0;
  double d_yaw = 0.0;
};

inline V3YawGradient v3_yaw_grad(const QuadKnotState& state, const Eigen::Vector3d& feature,
                                 const VisibilityParams& params,
                                 const Eigen::Vector3d& gravity = gravity_vector()) {
  const detail::FrameChain fc(state, feature, gravity);
  const Eigen::Vector3d c3 = fc.n3.cross(fc.b_hat);
  const double s3 = c3.norm();
  V3YawGradient out;
  out.v3 = sigmoid(params.k3 * (s3 - params.sin_alpha3));
  if (s3 > 1e-12) {
    const Eigen::Vector3d c3h = c3 / s3;
    const Eigen::Vector3d g3 = fc.n3_from_cross_adjoint(fc.b_hat.cross(c3h));
    const double s3_d_yaw = g3.dot(fc.n1.cross(fc.dny_dyaw));
    out.d_yaw = out.v3 * (1.0 - out.v3) * params.k3 * s3_d_yaw;
  }
  return out;
}

}  // namespace visplan

#endif  // VISPLAN_VISIBILITY_HPP_
