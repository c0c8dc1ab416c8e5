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

#ifndef VISPLAN_POSITION_PLANNER_HPP_
#define VISPLAN_POSITION_PLANNER_HPP_

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "visplan/bspline.hpp"
#include "visplan/environment.hpp"
#include "visplan/frames.hpp"
#include "visplan/optimize.hpp"
#include "visplan/visibility.hpp"

namespace visplan {

/// Stage-one weights and limits. a1, a2, nu and rho_max default to the
/// published constants; the lambda weights have no published values and are
/// tuned on the bundled fixtures.
struct PositionPlanConfig {
  double lambda_vc = 2.0;
  double lambda_para = 20.0;
  double lambda_smooth = 1.0;
  double lambda_safe = 50.0;
  double lambda_time = 1.0;
  double lambda_feas = 50.0;
  double a1 = 10.0;
  double a2 = 20.0;
  double nu = 20.0;                        // image frame frequency, Hz
  double rho_max = 10.0 * M_PI / 180.0;    // max parallax between frames, rad
  double v_max = 3.0;                      // m/s
  double a_max = 2.5;                      // m/s^2
  double d_safe = 0.4;                     // m
  double dt_min = 0.05;                    // s, lower bound on the knot span
  double gravity = kGravity;
  int max_iterations = 300;
  double gradient_tolerance = 1e-4;
  double relative_cost_tolerance = 1e-8;

  void validate() const {
    if (lambda_vc < 0 || lambda_para < 0 || lambda_smooth < 0 || lambda_safe < 0 ||
        lambda_time < 0 || lambda_feas < 0) {
      throw std::invalid_argument("PositionPlanConfig: weights must be >= 0");
    }
    if (!(a1 > 0 && a2 > 0 && nu > 0)) {
      throw std::invalid_argument("PositionPlanConfig: a1, a2, nu must be > 0");
    }
    if (!(rho_max > 0 && rho_max < M_PI)) {
      throw std::invalid_argument("PositionPlanConfig: rho_max out of (0, pi)");
    }
    if (!(v_max > 0 && a_max > 0 && d_safe > 0 && dt_min > 0)) {
      throw std::invalid_argument("PositionPlanConfig: limits must be > 0");
    }
  }
};

/// Scalar cost with its gradient with respect to every control point (one
/// column each, matching the curve layout) and the knot span.
struct CostReport {
  double cost = 0.0;
  Eigen::MatrixXd d_control_points;
  double d_knot_span = 0.0;

  explicit CostReport(int dim = 3, int n_ctrl = 0)
      : d_control_points(Eigen::MatrixXd::Zero(dim, n_ctrl)) {}
};

namespace detail {

/// Positions and accelerations at the knots of a cubic curve, kept linear in
/// the control points so chain rules stay exact.
struct KnotKinematics {
  std::vector<Eigen::Vector3d> position;
  std::vector<Eigen::Vector3d> acceleration;
  double dt;

  explicit KnotKinematics(const UniformBSpline& curve) : dt(curve.knot_span()) {
    const auto& q = curve.control_points();
    const int knots = curve.num_knot_points();
    position.reserve(knots);
    acceleration.reserve(knots);
    for (int i = 0; i < knots; ++i) {
      position.push_back((q.col(i) + 4.0 * q.col(i + 1) + q.col(i + 2)) / 6.0);
      acceleration.push_back((q.col(i) - 2.0 * q.col(i + 1) + q.col(i + 2)) / (dt * dt));
    }
  }

  // Adds d(cost)/d(position_i) and d(cost)/d(acceleration_i) contributions to
  // the control-point and knot-span gradients.
  void accumulate(CostReport& report, int i, const Eigen::Vector3d& d_pos,
                  const Eigen::Vector3d& d_acc) const {
    static constexpr double wp[3] = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
    const double wa[3] = {1.0 / (dt * dt), -2.0 / (dt * dt), 1.0 / (dt * dt)};
    for (int o = 0; o < 3; ++o) {
      report.d_control_points.col(i + o) += wp[o] * d_pos + wa[o] * d_acc;
    }
    report.d_knot_span += d_acc.dot(-2.0 * acceleration[i] / dt);
  }
};

// One-sided quadratic band penalty on theta1 outside
// [(pi - alpha_v)/2, (pi + alpha_v)/2].
struct BandPenalty {
  double lo, hi, a1;
  BandPenalty(double alpha_v, double a1_in)
      : lo((M_PI - alpha_v) / 2.0), hi((M_PI + alpha_v) / 2.0), a1(a1_in) {}
  double value(double theta) const {
    if (theta > hi) return a1 * (theta - hi) * (theta - hi);
    if (theta < lo) return a1 * (theta - lo) * (theta - lo);
    return 0.0;
  }
  double slope(double theta) const {
    if (theta > hi) return 2.0 * a1 * (theta - hi);
    if (theta < lo) return 2.0 * a1 * (theta - lo);
    return 0.0;
  }
};

}  // namespace detail

/// Vertical covisibility cost: for each adjacent knot pair and feature within
/// FoV depth of both, (1 + g(theta1_i))(1 + g(theta1_i+1)) - 1 with g the
/// band penalty on the angle to the thrust axis.
inline CostReport cost_vertical_covisibility(const UniformBSpline& curve, const Environment& env,
                                             const FovSpec& fov, double a1,
                                             double gravity = kGravity) {
  if (curve.num_knot_points() < 2) {
    throw std::invalid_argument("cost_vertical_covisibility: need at least 2 knot states");
  }
  const detail::KnotKinematics kin(curve);
  const detail::BandPenalty band(fov.alpha_v, a1);
  const Eigen::Vector3d g_vec = gravity_vector(gravity);
  CostReport report(curve.dimension(), curve.num_control_points());

  const auto& features = env.features();
  for (size_t i = 0; i + 1 < kin.position.size(); ++i) {
    const auto ids = env.features_in_depth(kin.position[i], kin.position[i + 1], fov.d_max);
    for (int id : ids) {
      const auto ta = theta1_grad(kin.position[i], kin.acceleration[i], features[id], g_vec);
      const auto tb =
          theta1_grad(kin.position[i + 1], kin.acceleration[i + 1], features[id], g_vec);
      const double ga = band.value(ta.theta1);
      const double gb = band.value(tb.theta1);
      report.cost += (1.0 + ga) * (1.0 + gb) - 1.0;
      const double da = band.slope(ta.theta1) * (1.0 + gb);
      const double db = (1.0 + ga) * band.slope(tb.theta1);
      if (da != 0.0) kin.accumulate(report, static_cast<int>(i), da * ta.d_position, da * ta.d_acceleration);
      if (db != 0.0) kin.accumulate(report, static_cast<int>(i + 1), db * tb.d_position, db * tb.d_acceleration);
    }
  }
  return report;
}

/// Frozen parallax weights: the (knot pair, feature) index set and the
/// v1'(theta1) weights captured at one evaluation point. Passing them back
/// into cost_parallax makes the cost a smooth function of the curve, which is
/// what the gradient contract differentiates.
struct ParallaxWeights {
  std::vector<std::vector<int>> feature_ids;  // per knot pair
  std::vector<std::vector<double>> weights;
};

inline ParallaxWeights parallax_weights(const UniformBSpline& curve, const Environment& env,
                                        const FovSpec& fov, double gravity = kGravity) {
  const detail::KnotKinematics kin(curve);
  const Eigen::Vector3d g_vec = gravity_vector(gravity);
  ParallaxWeights out;
  const auto& features = env.features();
  for (size_t i = 0; i + 1 < kin.position.size(); ++i) {
    auto ids = env.features_in_depth(kin.position[i], kin.position[i + 1], fov.d_max);
    std::vector<double> w;
    w.reserve(ids.size());
    for (int id : ids) {
      const auto ta = theta1_grad(kin.position[i], kin.acceleration[i], features[id], g_vec);
      w.push_back(v1_prime_weight(ta.theta1, fov.alpha_v));
    }
    out.feature_ids.push_back(std::move(ids));
    out.weights.push_back(std::move(w));
  }
  return out;
}

/// Parallax cost: w_ij * a2 (rho - rho_thr)^2 for knot-pair parallax angles
/// exceeding rho_thr = nu * rho_max * dt. The weights carry no gradient; when
/// none are supplied they are recomputed from the current curve.
inline CostReport cost_parallax(const UniformBSpline& curve, const Environment& env,
                                const FovSpec& fov, const PositionPlanConfig& config,
                                const ParallaxWeights* frozen = nullptr) {
  if (curve.num_knot_points() < 2) {
    throw std::invalid_argument("cost_parallax: need at least 2 knot states");
  }
  const detail::KnotKinematics kin(curve);
  CostReport report(curve.dimension(), curve.num_control_points());
  const double rho_thr = config.nu * config.rho_max * kin.dt;
  const double d_rho_thr_d_dt = config.nu * config.rho_max;

  ParallaxWeights local;
  if (frozen == nullptr) local = parallax_weights(curve, env, fov, config.gravity);
  const ParallaxWeights& w = frozen ? *frozen : local;
  if (w.feature_ids.size() + 1 != kin.position.size()) {
    throw std::invalid_argument("cost_parallax: frozen weights do not match the knot structure");
  }
  const auto& features = env.features();
  for (size_t i = 0; i + 1 < kin.position.size(); ++i) {
    const auto& ids = w.feature_ids[i];
    for (size_t n = 0; n < ids.size(); ++n) {
      const Eigen::Vector3d& f = features[ids[n]];
      const Eigen::Vector3d r1 = kin.position[i] - f;
      const Eigen::Vector3d r2 = kin.position[i + 1] - f;
      const double n1 = r1.norm();
      const double n2 = r2.norm();
      if (n1 <= 1e-9 || n2 <= 1e-9) {
        throw std::invalid_argument("cost_parallax: feature coincides with a knot point");
      }
      const double u = std::min(1.0, std::max(-1.0, r1.dot(r2) / (n1 * n2)));
      const double rho = std::acos(u);
      if (rho <= rho_thr) continue;
      const double weight = w.weights[i][n];
      const double diff = rho - rho_thr;
      report.cost += weight * config.a2 * diff * diff;
      const double dh = weight * 2.0 * config.a2 * diff;
      report.d_knot_span += -dh * d_rho_thr_d_dt;
      const double s = std::sqrt(std::max(1.0 - u * u, 0.0));
      if (s > 1e-9) {
        const double dacos = -1.0 / s;
        const Eigen::Vector3d du_dp1 = (r2 / n2 - u * r1 / n1) / n1;
        const Eigen::Vector3d du_dp2 = (r1 / n1 - u * r2 / n2) / n2;
        kin.accumulate(report, static_cast<int>(i), dh * dacos * du_dp1, Eigen::Vector3d::Zero());
        kin.accumulate(report, static_cast<int>(i + 1), dh * dacos * du_dp2,
                       Eigen::Vector3d::Zero());
      }
    }
  }
  return report;
}

/// Exact integral of squared jerk; jerk is piecewise constant for cubics, so
/// the integral is sum_spans |third difference / dt^3|^2 * dt.
inline CostReport cost_smoothness(const UniformBSpline& curve) {
  if (curve.degree() != 3) {
    throw std::invalid_argument("cost_smoothness: expects a degree-3 curve");
  }
  const auto& q = curve.control_points();
  const double dt = curve.knot_span();
  const double dt5 = std::pow(dt, 5);
  CostReport report(curve.dimension(), curve.num_control_points());
  static constexpr double coef[4] = {-1.0, 3.0, -3.0, 1.0};
  for (int i = 0; i + 3 < curve.num_control_points(); ++i) {
    const Eigen::VectorXd d = q.col(i + 3) - 3.0 * q.col(i + 2) + 3.0 * q.col(i + 1) - q.col(i);
    report.cost += d.squaredNorm() / dt5;
    for (int o = 0; o < 4; ++o) {
      report.d_control_points.col(i + o) += 2.0 * coef[o] * d / dt5;
    }
    report.d_knot_span += -5.0 * d.squaredNorm() / (dt5 * dt);
  }
  return report;
}

/// Quadratic hinge on knot-point clearance below d_safe.
inline CostReport cost_safety(const UniformBSpline& curve, const Environment& env,
                              double d_safe) {
  const detail::KnotKinematics kin(curve);
  CostReport report(curve.dimension(), curve.num_control_points());
  for (size_t i = 0; i < kin.position.size(); ++i) {
    const double c = env.clearance(kin.position[i]);
    const double gap = d_safe - c;
    if (gap <= 0.0) continue;
    report.cost += gap * gap;
    const Eigen::Vector3d d_pos = -2.0 * gap * env.clearance_gradient(kin.position[i]);
    kin.accumulate(report, static_cast<int>(i), d_pos, Eigen::Vector3d::Zero());
  }
  report.d_knot_span = 0.0;  // knot positions do not depend on the span
  return report;
}

/// Total execution time (span count times knot span).
inline CostReport cost_time(const UniformBSpline& curve) {
  CostReport report(curve.dimension(), curve.num_control_points());
  report.cost = curve.num_spans() * curve.knot_span();
  report.d_knot_span = curve.num_spans();
  return report;
}

/// Per-axis quadratic hinges on the velocity and acceleration control points
/// against limits v_max/sqrt(3) and a_max/sqrt(3); by the convex hull property
/// this bounds the Euclidean velocity and acceleration everywhere.
inline CostReport cost_feasibility(const UniformBSpline& curve, double v_max, double a_max) {
  if (!(curve.knot_span() > 0.0)) {
    throw std::invalid_argument("cost_feasibility: knot span must be > 0");
  }
  const auto& q = curve.control_points();
  const double dt = curve.knot_span();
  const int dim = curve.dimension();
  const int n_ctrl = curve.num_control_points();
  const double v_lim = v_max / std::sqrt(3.0);
  const double a_lim = a_max / std::sqrt(3.0);
  CostReport report(dim, n_ctrl);

  for (int i = 0; i + 1 < n_ctrl; ++i) {
    const Eigen::VectorXd v = (q.col(i + 1) - q.col(i)) / dt;
    for (int ax = 0; ax < dim; ++ax) {
      const double over = std::abs(v(ax)) - v_lim;
      if (over <= 0.0) continue;
      report.cost += over * over;
      const double sign = v(ax) >= 0.0 ? 1.0 : -1.0;
      const double d_v = 2.0 * over * sign;
      report.d_control_points(ax, i + 1) += d_v / dt;
      report.d_control_points(ax, i) -= d_v / dt;
      report.d_knot_span += d_v * (-v(ax) / dt);
    }
  }
  for (int i = 0; i + 2 < n_ctrl; ++i) {
    const Eigen::VectorXd a = (q.col(i + 2) - 2.0 * q.col(i + 1) + q.col(i)) / (dt * dt);
    for (int ax = 0; ax < dim; ++ax) {
      const double over = std::abs(a(ax)) - a_lim;
      if (over <= 0.0) continue;
      report.cost += over * over;
      const double sign = a(ax) >= 0.0 ? 1.0 : -1.0;
      const double d_a = 2.0 * over * sign;
      report.d_control_points(ax, i) += d_a / (dt * dt);
      report.d_control_points(ax, i + 1) += -2.0 * d_a / (dt * dt);
      report.d_control_points(ax, i + 2) += d_a / (dt * dt);
      report.d_knot_span += d_a * (-2.0 * a(ax) / dt);
    }
  }
  return report;
}

struct IterationRecord {
  int iteration = 0;
  double total_cost = 0.0;
  double gradient_norm = 0.0;
  double knot_span = 0.0;
  std::map<std::string, double> terms;
};

struct OptimizationTrace {
  std::vector<IterationRecord> iterations;
  bool converged = false;
  std::string stop_reason;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

struct EndpointState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

struct PositionPlanResult {
  UniformBSpline curve;
  UniformBSpline initial_curve;  // waypoint fit the descent started from
  OptimizationTrace trace;
};

namespace detail {

inline std::vector<Eigen::VectorXd> resample_polyline(const std::vector<Eigen::Vector3d>& path,
                                                      double spacing, int min_points) {
  std::vector<double> cumulative{0.0};
  for (size_t i = 1; i < path.size(); ++i) {
    cumulative.push_back(cumulative.back() + (path[i] - path[i - 1]).norm());
  }
  const double length = cumulative.back();
  int count = std::max(min_points, static_cast<int>(std::ceil(length / spacing)) + 1);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double target = length * (count == 1 ? 0.0 : double(k) / (count - 1));
    size_t seg = 1;
    while (seg + 1 < cumulative.size() && cumulative[seg] < target) ++seg;
    const double lo = cumulative[seg - 1];
    const double hi = cumulative[seg];
    const double alpha = hi > lo ? (target - lo) / (hi - lo) : 0.0;
    out.push_back(path[seg - 1] + alpha * (path[seg] - path[seg - 1]));
  }
  return out;
}

}  // namespace detail

/// Stage-one optimization: fits an initial curve to the A* path, then runs
/// quasi-Newton descent over the interior control points and the knot span.
/// The first and last three control points stay fixed (boundary position and
/// velocity); the knot span is kept above dt_min by an exponential
/// reparameterization. Returns the best iterate; nonconvergence is reported
/// through the trace, never as an error.
inline PositionPlanResult optimize_position(const Environment& env, const EndpointState& start,
                                            const EndpointState& goal, const FovSpec& fov,
                                            [[maybe_unused]] const VisibilityParams& params,
                                            const PositionPlanConfig& config) {
  config.validate();
  fov.validate();

  const auto path = env.astar_initial_path(start.position, goal.position, config.d_safe);

  const double dt0 = std::max(0.3, 2.0 * config.dt_min);
  const double spacing = 0.5 * config.v_max * dt0;
  const auto waypoints = detail::resample_polyline(path, spacing, 5);
  WaypointFit fit = fit_waypoints(waypoints, dt0, start.velocity, goal.velocity);

  const int n_ctrl = fit.curve.num_control_points();
  const int dim = 3;
  const int n_free = std::max(0, n_ctrl - 6);
  const Eigen::MatrixXd q0 = fit.curve.control_points();
  const double start_time = fit.curve.start_time();

  // Variables: interior control points (columns 3 .. n_ctrl-4) plus tau with
  // dt = dt_min + exp(tau).
  const int n_vars = dim * n_free + 1;
  Eigen::VectorXd x0(n_vars);
  for (int c = 0; c < n_free; ++c) x0.segment(dim * c, dim) = q0.col(3 + c);
  x0(n_vars - 1) = std::log(dt0 - config.dt_min);

  auto unpack = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd q = q0;
    for (int c = 0; c < n_free; ++c) q.col(3 + c) = x.segment(dim * c, dim);
    const double dt = config.dt_min + std::exp(x(n_vars - 1));
    return UniformBSpline(3, std::move(q), dt, start_time);
  };

  std::map<std::string, double> last_terms;
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
    const UniformBSpline curve = unpack(x);
    const CostReport vc = cost_vertical_covisibility(curve, env, fov, config.a1, config.gravity);
    const CostReport para = cost_parallax(curve, env, fov, config);
    const CostReport smooth = cost_smoothness(curve);
    const CostReport safe = cost_safety(curve, env, config.d_safe);
    const CostReport time = cost_time(curve);
    const CostReport feas = cost_feasibility(curve, config.v_max, config.a_max);

    const double total = config.lambda_vc * vc.cost + config.lambda_para * para.cost +
                         config.lambda_smooth * smooth.cost + config.lambda_safe * safe.cost +
                         config.lambda_time * time.cost + config.lambda_feas * feas.cost;
    Eigen::MatrixXd d_q = config.lambda_vc * vc.d_control_points +
                          config.lambda_para * para.d_control_points +
                          config.lambda_smooth * smooth.d_control_points +
                          config.lambda_safe * safe.d_control_points +
                          config.lambda_time * time.d_control_points +
                          config.lambda_feas * feas.d_control_points;
    const double d_dt = config.lambda_vc * vc.d_knot_span + config.lambda_para * para.d_knot_span +
                        config.lambda_smooth * smooth.d_knot_span +
                        config.lambda_safe * safe.d_knot_span +
                        config.lambda_time * time.d_knot_span +
                        config.lambda_feas * feas.d_knot_span;

    grad.resize(n_vars);
    for (int c = 0; c < n_free; ++c) grad.segment(dim * c, dim) = d_q.col(3 + c);
    grad(n_vars - 1) = d_dt * std::exp(x(n_vars - 1));

    last_terms = {{"vertical_covisibility", vc.cost}, {"parallax", para.cost},
                  {"smoothness", smooth.cost},        {"safety", safe.cost},
                  {"time", time.cost},                {"feasibility", feas.cost}};
    return total;
  };

  DescentOptions opts;
  opts.max_iterations = config.max_iterations;
  opts.gradient_tolerance = config.gradient_tolerance;
  opts.relative_cost_tolerance = config.relative_cost_tolerance;

  OptimizationTrace trace;
  {
    Eigen::VectorXd g(n_vars);
    trace.initial_cost = eval(x0, g);
    IterationRecord rec;
    rec.iteration = 0;
    rec.total_cost = trace.initial_cost;
    rec.gradient_norm = g.norm();
    rec.knot_span = dt0;
    rec.terms = last_terms;
    trace.iterations.push_back(std::move(rec));
  }

  const DescentResult result = minimize(
      eval, x0, opts, [&](int iter, const Eigen::VectorXd& x, double cost, double grad_norm) {
        IterationRecord rec;
        rec.iteration = iter + 1;
        rec.total_cost = cost;
        rec.gradient_norm = grad_norm;
        rec.knot_span = config.dt_min + std::exp(x(n_vars - 1));
        rec.terms = last_terms;
        trace.iterations.push_back(std::move(rec));
      });

  trace.converged = result.converged;
  trace.stop_reason = result.stop_reason;
  trace.final_cost = std::min(result.cost, trace.initial_cost);

  // Best-iterate contract: never return something worse than the fit.
  if (result.cost <= trace.initial_cost) {
    return {unpack(result.x), fit.curve, std::move(trace)};
  }
  return {fit.curve, fit.curve, std::move(trace)};
}

}  // namespace visplan

#endif  // VISPLAN_POSITION_PLANNER_HPP_
