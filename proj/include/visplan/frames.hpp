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

#ifndef VISPLAN_FRAMES_HPP_
#define VISPLAN_FRAMES_HPP_

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "visplan/bspline.hpp"

namespace visplan {

inline constexpr double kGravity = 9.81;  // m/s^2, configurable via the vector overloads

inline Eigen::Vector3d gravity_vector(double g = kGravity) { return {0.0, 0.0, -g}; }

/// Quadrotor state at a knot: flat outputs plus the derived orthonormal frame.
/// n1 is the thrust direction, n2 the camera optical axis, n3 = n1 x n_y
/// normalized, with n2 = n3 x n1 (right-handed).
struct QuadKnotState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  Eigen::Vector3d n1 = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d n2 = Eigen::Vector3d::UnitX();
  Eigen::Vector3d n3 = Eigen::Vector3d::UnitY();
};

inline constexpr double kFrameEpsilon = 1e-6;

/// Unit thrust direction (a - g) / |a - g|. Throws when the quadrotor would be
/// in free fall (|a - g| below epsilon), where the direction is undefined.
inline Eigen::Vector3d thrust_dir(const Eigen::Vector3d& acceleration,
                                  const Eigen::Vector3d& gravity = gravity_vector()) {
  const Eigen::Vector3d f = acceleration - gravity;
  const double norm = f.norm();
  if (norm <= kFrameEpsilon) {
    throw std::domain_error("thrust_dir: |a - g| = " + std::to_string(norm) +
                            ", free-fall state has no thrust direction");
  }
  return f / norm;
}

inline Eigen::Vector3d yaw_dir(double yaw) { return {std::cos(yaw), std::sin(yaw), 0.0}; }

/// Camera frame from thrust and yaw directions: n3 = (n1 x ny)/|n1 x ny|,
/// n2 = n3 x n1. Throws when n1 is parallel to ny (tilt of 90 degrees).
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> camera_frame(const Eigen::Vector3d& n1,
                                                                const Eigen::Vector3d& ny) {
  const Eigen::Vector3d cross = n1.cross(ny);
  const double norm = cross.norm();
  if (norm <= kFrameEpsilon) {
    throw std::domain_error("camera_frame: thrust direction parallel to yaw direction");
  }
  const Eigen::Vector3d n3 = cross / norm;
  const Eigen::Vector3d n2 = n3.cross(n1);
  return {n2, n3};
}

inline QuadKnotState make_state(const Eigen::Vector3d& position, const Eigen::Vector3d& velocity,
                                const Eigen::Vector3d& acceleration, double yaw,
                                const Eigen::Vector3d& gravity = gravity_vector()) {
  QuadKnotState s;
  s.position = position;
  s.velocity = velocity;
  s.acceleration = acceleration;
  s.yaw = yaw;
  s.n1 = thrust_dir(acceleration, gravity);
  auto [n2, n3] = camera_frame(s.n1, yaw_dir(yaw));
  s.n2 = n2;
  s.n3 = n3;
  return s;
}

/// Knot states of a position trajectory, optionally paired with a yaw curve
/// sharing its knot structure. Without a yaw curve the yaw defaults to the
/// velocity heading, which keeps frames well defined during the position
/// stage where no cost depends on yaw.
inline std::vector<QuadKnotState> knot_states(const UniformBSpline& position_curve,
                                              const UniformBSpline* yaw_curve = nullptr,
                                              const Eigen::Vector3d& gravity = gravity_vector()) {
  if (position_curve.dimension() != 3) {
    throw std::invalid_argument("knot_states: position curve must be 3-dimensional");
  }
  if (yaw_curve != nullptr) {
    if (yaw_curve->dimension() != 1) {
      throw std::invalid_argument("knot_states: yaw curve must be scalar");
    }
    if (yaw_curve->num_knot_points() != position_curve.num_knot_points() ||
        std::abs(yaw_curve->knot_span() - position_curve.knot_span()) > 1e-12) {
      throw std::invalid_argument("knot_states: yaw curve knot structure mismatch");
    }
  }
  const UniformBSpline vel = position_curve.derivative();
  const UniformBSpline acc = vel.derivative();
  const auto p = position_curve.knot_points();
  const auto v = vel.knot_points();
  const auto a = acc.knot_points();
  std::vector<double> yaw(position_curve.num_knot_points());
  if (yaw_curve != nullptr) {
    const auto y = yaw_curve->knot_points();
    for (size_t i = 0; i < yaw.size(); ++i) yaw[i] = y[i](0);
  } else {
    for (size_t i = 0; i < yaw.size(); ++i) yaw[i] = std::atan2(v[i](1), v[i](0));
  }
  std::vector<QuadKnotState> states;
  states.reserve(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    states.push_back(make_state(p[i].head<3>(), v[i].head<3>(), a[i].head<3>(), yaw[i], gravity));
  }
  return states;
}

/// Samples full states at arbitrary times of a position trajectory (and an
/// optional yaw curve over the same domain). Derivative curves are prepared
/// once at construction.
class TrajectorySampler {
 public:
  TrajectorySampler(UniformBSpline position_curve, std::optional<UniformBSpline> yaw_curve,
                    const Eigen::Vector3d& gravity = gravity_vector())
      : pos_(std::move(position_curve)),
        vel_(pos_.derivative()),
        acc_(vel_.derivative()),
        gravity_(gravity) {
    if (yaw_curve) {
      yaw_ = std::move(*yaw_curve);
      yaw_rate_ = yaw_->derivative();
      if (std::abs(yaw_->start_time() - pos_.start_time()) > 1e-9 ||
          std::abs(yaw_->end_time() - pos_.end_time()) > 1e-9) {
        throw std::invalid_argument("TrajectorySampler: curves cover different time domains");
      }
    }
  }

  double start_time() const { return pos_.start_time(); }
  double end_time() const { return pos_.end_time(); }

  QuadKnotState state(double t) const {
    const Eigen::Vector3d p = pos_.eval(t).head<3>();
    const Eigen::Vector3d v = vel_.eval(t).head<3>();
    const Eigen::Vector3d a = acc_.eval(t).head<3>();
    const double psi = yaw_ ? yaw_->eval(t)(0) : std::atan2(v.y(), v.x());
    return make_state(p, v, a, psi, gravity_);
  }

  double yaw_rate(double t) const { return yaw_rate_ ? yaw_rate_->eval(t)(0) : 0.0; }

  const UniformBSpline& position_curve() const { return pos_; }
  const std::optional<UniformBSpline>& yaw_curve() const { return yaw_; }

 private:
  UniformBSpline pos_;
  UniformBSpline vel_;
  UniformBSpline acc_;
  std::optional<UniformBSpline> yaw_;
  std::optional<UniformBSpline> yaw_rate_;
  Eigen::Vector3d gravity_;
};

}  // namespace visplan

#endif  // VISPLAN_FRAMES_HPP_
