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

#ifndef VISPLAN_YAW_PLANNER_HPP_
#define VISPLAN_YAW_PLANNER_HPP_

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "visplan/bspline.hpp"
#include "visplan/environment.hpp"
#include "visplan/frames.hpp"
#include "visplan/optimize.hpp"
#include "visplan/position_planner.hpp"
#include "visplan/visibility.hpp"

namespace visplan {

/// Wraps an angle into [-pi, pi].
inline double wrap_angle(double x) { return std::remainder(x, 2.0 * M_PI); }

struct YawPlanConfig {
  int samples_per_layer = 16;     // l + 1 yaw samples per knot
  double psi_dot_max = 1.5;       // rad/s
  double lambda1 = 1.0;           // primitive guidance weight
  double lambda2 = 1.0;           // covisibility weight
  int max_iterations = 150;
  double gradient_tolerance = 1e-5;
  double relative_cost_tolerance = 1e-9;

  void validate() const {
    if (samples_per_layer < 2) {
      throw std::invalid_argument("YawPlanConfig: samples_per_layer must be >= 2");
    }
    if (!(psi_dot_max > 0.0)) throw std::invalid_argument("YawPlanConfig: psi_dot_max must be > 0");
    if (lambda1 < 0.0 || lambda2 < 0.0) {
      throw std::invalid_argument("YawPlanConfig: lambda1, lambda2 must be >= 0");
    }
  }
};

/// Layered yaw-primitive graph: one layer of sampled yaw values per knot,
/// edges only between consecutive layers that satisfy the yaw rate bound,
/// each edge carrying the covisibility gain of its endpoint states. Virtual
/// source and sink connect to the first and last layers with zero gain.
struct YawGraph {
  struct Edge {
    int from = 0;  // sample index in layer i
    int to = 0;    // sample index in layer i+1
    double gain = 0.0;
  };
  std::vector<std::vector<double>> layers;
  std::vector<std::vector<Edge>> edges;  // edges[i]: layer i -> layer i+1
  double rate_bound = 0.0;               // psi_dot_max * dt
};

/// Builds the primitive graph over the knot states of an optimized position
/// trajectory. Edge gains are plain covisibility evaluations with the edge's
/// endpoint yaws substituted into the frames.
inline YawGraph build_yaw_graph(const std::vector<QuadKnotState>& states, const Environment& env,
                                const FovSpec& fov, const VisibilityParams& params,
                                const YawPlanConfig& config, double knot_span,
                                double gravity = kGravity) {
  config.validate();
  if (states.size() < 2) {
    throw std::invalid_argument("build_yaw_graph: need at least 2 knot states");
  }
  const int n_samples = config.samples_per_layer;
  std::vector<double> samples(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    samples[s] = -M_PI + 2.0 * M_PI * s / n_samples;
  }

  YawGraph graph;
  graph.rate_bound = config.psi_dot_max * knot_span;
  graph.layers.assign(states.size(), samples);
  graph.edges.resize(states.size() - 1);

  const Eigen::Vector3d g_vec = gravity_vector(gravity);
  const auto& features = env.features();
  for (size_t i = 0; i + 1 < states.size(); ++i) {
    const auto ids = env.features_in_depth(states[i].position, states[i + 1].position, fov.d_max);

    // Per-sample visibility tables for the two layers of this pair.
    Eigen::MatrixXd va(n_samples, ids.size()), vb(n_samples, ids.size());
    for (int s = 0; s < n_samples; ++s) {
      const QuadKnotState sa = make_state(states[i].position, states[i].velocity,
                                          states[i].acceleration, samples[s], g_vec);
      const QuadKnotState sb = make_state(states[i + 1].position, states[i + 1].velocity,
                                          states[i + 1].acceleration, samples[s], g_vec);
      for (size_t j = 0; j < ids.size(); ++j) {
        va(s, j) = visibility(sa, features[ids[j]], params);
        vb(s, j) = visibility(sb, features[ids[j]], params);
      }
    }

    for (int s1 = 0; s1 < n_samples; ++s1) {
      for (int s2 = 0; s2 < n_samples; ++s2) {
        if (std::abs(wrap_angle(samples[s2] - samples[s1])) >= graph.rate_bound) continue;
        double gain = 0.0;
        for (size_t j = 0; j < ids.size(); ++j) gain += va(s1, j) * vb(s2, j);
        graph.edges[i].push_back({s1, s2, gain});
      }
    }
  }
  return graph;
}

/// Maximum-gain source-to-sink path by dynamic programming over the layered
/// DAG. Every source-sink path has the same edge count, so this is the
/// shortest path under negated gains that the Dijkstra formulation describes.
/// Ties break toward minimal total absolute yaw change, then lowest sample
/// index.
inline std::vector<double> solve_primitives(const YawGraph& graph) {
  const size_t n_layers = graph.layers.size();
  struct NodeValue {
    double gain = -std::numeric_limits<double>::infinity();
    double change = std::numeric_limits<double>::infinity();
    int pred = -1;
    bool reachable = false;
  };
  std::vector<std::vector<NodeValue>> value(n_layers);
  value[0].assign(graph.layers[0].size(), NodeValue{0.0, 0.0, -1, true});
  for (size_t i = 1; i < n_layers; ++i) value[i].assign(graph.layers[i].size(), NodeValue{});

  for (size_t i = 0; i + 1 < n_layers; ++i) {
    for (const auto& e : graph.edges[i]) {
      const NodeValue& from = value[i][e.from];
      if (!from.reachable) continue;
      const double gain = from.gain + e.gain;
      const double change =
          from.change + std::abs(wrap_angle(graph.layers[i + 1][e.to] - graph.layers[i][e.from]));
      NodeValue& to = value[i + 1][e.to];
      const bool better = !to.reachable || gain > to.gain ||
                          (gain == to.gain &&
                           (change < to.change || (change == to.change && e.from < to.pred)));
      if (better) {
        to = NodeValue{gain, change, e.from, true};
      }
    }
    bool any = false;
    for (const auto& v : value[i + 1]) any = any || v.reachable;
    if (!any) {
      throw infeasible_error("solve_primitives: yaw layer " + std::to_string(i + 1) +
                             " unreachable under the rate bound");
    }
  }

  int best = -1;
  for (size_t s = 0; s < value.back().size(); ++s) {
    const NodeValue& v = value.back()[s];
    if (!v.reachable) continue;
    if (best < 0 || v.gain > value.back()[best].gain ||
        (v.gain == value.back()[best].gain && v.change < value.back()[best].change)) {
      best = static_cast<int>(s);
    }
  }

  std::vector<double> psi(n_layers);
  int node = best;
  for (size_t i = n_layers; i-- > 0;) {
    psi[i] = graph.layers[i][node];
    node = value[i][node].pred;
  }
  return psi;
}

/// Replaces each wrapped yaw value with the accumulated minimal-signed-step
/// continuation of its predecessor.
inline std::vector<double> unwrap_primitives(const std::vector<double>& psi_star) {
  std::vector<double> out;
  out.reserve(psi_star.size());
  if (psi_star.empty()) return out;
  out.push_back(psi_star.front());
  for (size_t i = 1; i < psi_star.size(); ++i) {
    const double d = wrap_angle(psi_star[i] - psi_star[i - 1]);
    if (std::abs(d) == M_PI) {
      throw std::invalid_argument("unwrap_primitives: consecutive difference of exactly pi is "
                                  "ambiguous");
    }
    out.push_back(out.back() + d);
  }
  return out;
}

struct YawPlanResult {
  UniformBSpline yaw_curve;
  OptimizationTrace trace;
};

/// Stage-two refinement: fits a yaw B-spline whose knot points equal the
/// unwrapped primitives, then minimizes jerk + guidance - covisibility over
/// all yaw control points. The v1 and v2 covisibility factors are frozen at
/// the initialization; only v3(i) v3(i+1) carries yaw gradients.
inline YawPlanResult optimize_yaw(const UniformBSpline& position_curve,
                                  const std::vector<double>& psi_star, const Environment& env,
                                  const FovSpec& fov, const VisibilityParams& params,
                                  const YawPlanConfig& config, double gravity = kGravity) {
  config.validate();
  const int n_knots = position_curve.num_knot_points();
  if (static_cast<int>(psi_star.size()) != n_knots) {
    throw std::invalid_argument("optimize_yaw: primitive count " +
                                std::to_string(psi_star.size()) + " != knot count " +
                                std::to_string(n_knots));
  }

  const double dt = position_curve.knot_span();
  const std::vector<double> unwrapped = unwrap_primitives(psi_star);
  std::vector<Eigen::VectorXd> waypoints;
  waypoints.reserve(unwrapped.size());
  for (double psi : unwrapped) waypoints.push_back(Eigen::VectorXd::Constant(1, psi));
  Eigen::VectorXd v_start = Eigen::VectorXd::Constant(1, (unwrapped[1] - unwrapped[0]) / dt);
  Eigen::VectorXd v_end = Eigen::VectorXd::Constant(
      1, (unwrapped[n_knots - 1] - unwrapped[n_knots - 2]) / dt);
  const WaypointFit fit =
      fit_waypoints(waypoints, dt, v_start, v_end, position_curve.start_time());

  const Eigen::Vector3d g_vec = gravity_vector(gravity);
  const auto pos_states = knot_states(position_curve, nullptr, g_vec);
  const auto& features = env.features();

  // Frozen v1 * v2 products per (knot pair, feature), evaluated once at the
  // primitive yaws.
  struct PairData {
    std::vector<int> ids;
    std::vector<double> frozen;  // v1(i) v1(i+1) v2(i) v2(i+1)
  };
  std::vector<PairData> pairs(n_knots - 1);
  {
    std::vector<QuadKnotState> init_states(n_knots);
    for (int i = 0; i < n_knots; ++i) {
      init_states[i] = make_state(pos_states[i].position, pos_states[i].velocity,
                                  pos_states[i].acceleration, unwrapped[i], g_vec);
    }
    for (int i = 0; i + 1 < n_knots; ++i) {
      pairs[i].ids =
          env.features_in_depth(pos_states[i].position, pos_states[i + 1].position, fov.d_max);
      for (int id : pairs[i].ids) {
        const auto ga = visibility_grad(init_states[i], features[id], params, g_vec);
        const auto gb = visibility_grad(init_states[i + 1], features[id], params, g_vec);
        pairs[i].frozen.push_back(ga.v1 * gb.v1 * ga.v2 * gb.v2);
      }
    }
  }

  const int n_ctrl = fit.curve.num_control_points();
  Eigen::VectorXd x0 = fit.curve.control_points().row(0).transpose();

  auto knot_yaw = [&](const Eigen::VectorXd& xi, int i) {
    return (xi(i) + 4.0 * xi(i + 1) + xi(i + 2)) / 6.0;
  };

  std::map<std::string, double> last_terms;
  auto eval = [&](const Eigen::VectorXd& xi, Eigen::VectorXd& grad) -> double {
    grad = Eigen::VectorXd::Zero(n_ctrl);

    // Jerk integral: piecewise-constant third differences.
    double jerk = 0.0;
    const double dt5 = std::pow(dt, 5);
    static constexpr double coef[4] = {-1.0, 3.0, -3.0, 1.0};
    for (int i = 0; i + 3 < n_ctrl; ++i) {
      const double d = xi(i + 3) - 3.0 * xi(i + 2) + 3.0 * xi(i + 1) - xi(i);
      jerk += d * d / dt5;
      for (int o = 0; o < 4; ++o) grad(i + o) += 2.0 * coef[o] * d / dt5;
    }

    // Guidance and decomposed covisibility need the knot yaws.
    std::vector<double> psi(n_knots);
    std::vector<double> d_psi(n_knots, 0.0);
    for (int i = 0; i < n_knots; ++i) psi[i] = knot_yaw(xi, i);

    double guidance = 0.0;
    for (int i = 0; i < n_knots; ++i) {
      const double diff = psi[i] - unwrapped[i];
      guidance += diff * diff;
      d_psi[i] += config.lambda1 * 2.0 * diff;
    }

    double covis = 0.0;
    for (int i = 0; i + 1 < n_knots; ++i) {
      if (pairs[i].ids.empty()) continue;
      const QuadKnotState sa = make_state(pos_states[i].position, pos_states[i].velocity,
                                          pos_states[i].acceleration, psi[i], g_vec);
      const QuadKnotState sb = make_state(pos_states[i + 1].position, pos_states[i + 1].velocity,
                                          pos_states[i + 1].acceleration, psi[i + 1], g_vec);
      for (size_t j = 0; j < pairs[i].ids.size(); ++j) {
        const Eigen::Vector3d& f = features[pairs[i].ids[j]];
        const auto a = v3_yaw_grad(sa, f, params, g_vec);
        const auto b = v3_yaw_grad(sb, f, params, g_vec);
        const double k = pairs[i].frozen[j];
        covis += k * a.v3 * b.v3;
        d_psi[i] += -config.lambda2 * k * a.d_yaw * b.v3;
        d_psi[i + 1] += -config.lambda2 * k * a.v3 * b.d_yaw;
      }
    }

    for (int i = 0; i < n_knots; ++i) {
      grad(i) += d_psi[i] / 6.0;
      grad(i + 1) += d_psi[i] * 4.0 / 6.0;
      grad(i + 2) += d_psi[i] / 6.0;
    }

    const double total = jerk + config.lambda1 * guidance - config.lambda2 * covis;
    last_terms = {{"jerk", jerk}, {"guidance", guidance}, {"covisibility", covis}};
    return total;
  };

  DescentOptions opts;
  opts.max_iterations = config.max_iterations;
  opts.gradient_tolerance = config.gradient_tolerance;
  opts.relative_cost_tolerance = config.relative_cost_tolerance;

  OptimizationTrace trace;
  {
    Eigen::VectorXd g(n_ctrl);
    trace.initial_cost = eval(x0, g);
    IterationRecord rec;
    rec.iteration = 0;
    rec.total_cost = trace.initial_cost;
    rec.gradient_norm = g.norm();
    rec.knot_span = dt;
    rec.terms = last_terms;
    trace.iterations.push_back(std::move(rec));
  }

  const DescentResult result = minimize(
      eval, x0, opts, [&](int iter, const Eigen::VectorXd&, double cost, double grad_norm) {
        IterationRecord rec;
        rec.iteration = iter + 1;
        rec.total_cost = cost;
        rec.gradient_norm = grad_norm;
        rec.knot_span = dt;
        rec.terms = last_terms;
        trace.iterations.push_back(std::move(rec));
      });

  trace.converged = result.converged;
  trace.stop_reason = result.stop_reason;
  trace.final_cost = std::min(result.cost, trace.initial_cost);

  Eigen::MatrixXd q(1, n_ctrl);
  q.row(0) = (result.cost <= trace.initial_cost ? result.x : x0).transpose();
  return {UniformBSpline(3, std::move(q), dt, position_curve.start_time()), std::move(trace)};
}

}  // namespace visplan

#endif  // VISPLAN_YAW_PLANNER_HPP_
