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

#ifndef VISPLAN_ENVIRONMENT_HPP_
#define VISPLAN_ENVIRONMENT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace visplan {

/// Raised when a planning query has no feasible answer (blocked goal,
/// disconnected graph). The CLI maps it to its own exit code.
struct infeasible_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SphereObstacle {
  Eigen::Vector3d center;
  double radius;
};

struct BoxObstacle {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
};

struct Bounds {
  Eigen::Vector3d min;
  Eigen::Vector3d max;

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  // Distance to the bounds surface from inside (positive inside).
  double inner_distance(const Eigen::Vector3d& p) const {
    return std::min((p - min).minCoeff(), (max - p).minCoeff());
  }
};

inline double sphere_distance(const SphereObstacle& s, const Eigen::Vector3d& p) {
  return (p - s.center).norm() - s.radius;
}

inline Eigen::Vector3d sphere_distance_gradient(const SphereObstacle& s,
                                                const Eigen::Vector3d& p) {
  const Eigen::Vector3d d = p - s.center;
  const double n = d.norm();
  if (n < 1e-12) return Eigen::Vector3d::UnitZ();  // center: any direction
  return d / n;
}

inline double box_distance(const BoxObstacle& b, const Eigen::Vector3d& p) {
  Eigen::Vector3d outside = Eigen::Vector3d::Zero();
  double inside = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const double d = std::max(b.min(i) - p(i), p(i) - b.max(i));
    inside = std::max(inside, d);
    outside(i) = std::max(d, 0.0);
  }
  const double out_norm = outside.norm();
  return out_norm > 0.0 ? out_norm : inside;
}

inline Eigen::Vector3d box_distance_gradient(const BoxObstacle& b, const Eigen::Vector3d& p) {
  Eigen::Vector3d outside = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) {
    if (p(i) > b.max(i)) outside(i) = p(i) - b.max(i);
    else if (p(i) < b.min(i)) outside(i) = -(b.min(i) - p(i));
  }
  const double out_norm = outside.norm();
  if (out_norm > 0.0) return outside / out_norm;
  // Inside: gradient points toward the nearest face.
  int best_axis = 0;
  double best = -std::numeric_limits<double>::infinity();
  double sign = 1.0;
  for (int i = 0; i < 3; ++i) {
    const double to_min = b.min(i) - p(i);  // negative inside
    const double to_max = p(i) - b.max(i);
    if (to_max > best) { best = to_max; best_axis = i; sign = 1.0; }
    if (to_min > best) { best = to_min; best_axis = i; sign = -1.0; }
  }
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  g(best_axis) = sign;
  return g;
}

/// Static scene: feature cloud, analytic obstacles and axis-aligned bounds.
/// Immutable after construction; all queries are const and thread-safe.
class Environment {
 public:
  Environment(Bounds bounds, std::vector<Eigen::Vector3d> features,
              std::vector<SphereObstacle> spheres, std::vector<BoxObstacle> boxes,
              double grid_resolution = 0.2)
      : bounds_(bounds),
        features_(std::move(features)),
        spheres_(std::move(spheres)),
        boxes_(std::move(boxes)),
        grid_resolution_(grid_resolution) {
    validate();
  }

  static Environment from_json(const nlohmann::json& j);
  static Environment load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_scene: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("load_scene: parse error in " + path + ": " + e.what());
    }
    return from_json(j);
  }

  const Bounds& bounds() const { return bounds_; }
  const std::vector<Eigen::Vector3d>& features() const { return features_; }
  const std::vector<SphereObstacle>& spheres() const { return spheres_; }
  const std::vector<BoxObstacle>& boxes() const { return boxes_; }
  double grid_resolution() const { return grid_resolution_; }
  bool has_obstacles() const { return !spheres_.empty() || !boxes_.empty(); }

  /// Ids (ascending) of features within d_max of both query points; the depth
  /// test uses closed balls.
  std::vector<int> features_in_depth(const Eigen::Vector3d& pa, const Eigen::Vector3d& pb,
                                     double d_max) const {
    if (!(d_max > 0.0)) throw std::invalid_argument("features_in_depth: d_max must be > 0");
    const double d2 = d_max * d_max;
    std::vector<int> ids;
    for (size_t i = 0; i < features_.size(); ++i) {
      if ((features_[i] - pa).squaredNorm() <= d2 && (features_[i] - pb).squaredNorm() <= d2) {
        ids.push_back(static_cast<int>(i));
      }
    }
    return ids;
  }

  /// Signed distance to the nearest obstacle surface, positive outside. With
  /// no obstacles the inner distance to the bounds stands in for +infinity.
  double clearance(const Eigen::Vector3d& p) const {
    if (!bounds_.contains(p)) {
      throw std::domain_error("clearance: point outside scene bounds");
    }
    if (!has_obstacles()) return bounds_.inner_distance(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : spheres_) best = std::min(best, sphere_distance(s, p));
    for (const auto& b : boxes_) best = std::min(best, box_distance(b, p));
    return best;
  }

  /// Spatial gradient of clearance() (gradient of the closest obstacle term).
  Eigen::Vector3d clearance_gradient(const Eigen::Vector3d& p) const {
    if (!bounds_.contains(p)) {
      throw std::domain_error("clearance_gradient: point outside scene bounds");
    }
    if (!has_obstacles()) {
      // Gradient of the inner bounds distance: unit axis toward the interior.
      int axis = 0;
      double best = std::numeric_limits<double>::infinity();
      double sign = 1.0;
      for (int i = 0; i < 3; ++i) {
        if (p(i) - bounds_.min(i) < best) { best = p(i) - bounds_.min(i); axis = i; sign = 1.0; }
        if (bounds_.max(i) - p(i) < best) { best = bounds_.max(i) - p(i); axis = i; sign = -1.0; }
      }
      Eigen::Vector3d g = Eigen::Vector3d::Zero();
      g(axis) = sign;
      return g;
    }
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (const auto& s : spheres_) {
      const double d = sphere_distance(s, p);
      if (d < best) { best = d; grad = sphere_distance_gradient(s, p); }
    }
    for (const auto& b : boxes_) {
      const double d = box_distance(b, p);
      if (d < best) { best = d; grad = box_distance_gradient(b, p); }
    }
    return grad;
  }

  std::vector<Eigen::Vector3d> astar_initial_path(const Eigen::Vector3d& start,
                                                  const Eigen::Vector3d& goal,
                                                  double margin) const;

 private:
  void validate() const {
    if (!(grid_resolution_ > 0.0)) {
      throw std::invalid_argument("Environment: grid_resolution must be > 0");
    }
    if (!((bounds_.max.array() > bounds_.min.array()).all())) {
      throw std::invalid_argument("Environment: bounds must have positive extent");
    }
    for (size_t i = 0; i < features_.size(); ++i) {
      if (!bounds_.contains(features_[i])) {
        throw std::invalid_argument("Environment: feature " + std::to_string(i) +
                                    " outside bounds");
      }
    }
    for (const auto& s : spheres_) {
      if (!(s.radius > 0.0)) throw std::invalid_argument("Environment: sphere radius must be > 0");
      if (!bounds_.contains(s.center - Eigen::Vector3d::Constant(s.radius)) ||
          !bounds_.contains(s.center + Eigen::Vector3d::Constant(s.radius))) {
        throw std::invalid_argument("Environment: sphere obstacle outside bounds");
      }
    }
    for (const auto& b : boxes_) {
      if (!((b.max.array() > b.min.array()).all())) {
        throw std::invalid_argument("Environment: box obstacle must have positive extent");
      }
      if (!bounds_.contains(b.min) || !bounds_.contains(b.max)) {
        throw std::invalid_argument("Environment: box obstacle outside bounds");
      }
    }
  }

  Bounds bounds_;
  std::vector<Eigen::Vector3d> features_;
  std::vector<SphereObstacle> spheres_;
  std::vector<BoxObstacle> boxes_;
  double grid_resolution_;
};

namespace detail {

inline Eigen::Vector3d parse_vec3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument("scene: " + what + " must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

inline Environment Environment::from_json(const nlohmann::json& j) {
  if (!j.contains("bounds")) throw std::invalid_argument("scene: missing bounds");
  Bounds bounds{detail::parse_vec3(j["bounds"]["min"], "bounds.min"),
                detail::parse_vec3(j["bounds"]["max"], "bounds.max")};

  std::vector<Eigen::Vector3d> features;
  std::set<std::int64_t> seen_ids;
  if (j.contains("features")) {
    for (const auto& f : j["features"]) {
      if (f.is_object()) {
        // Optional explicit-id form {"id": n, "position": [x, y, z]}.
        const std::int64_t id = f.at("id").get<std::int64_t>();
        if (!seen_ids.insert(id).second) {
          throw std::invalid_argument("scene: duplicate feature id " + std::to_string(id));
        }
        features.push_back(detail::parse_vec3(f.at("position"), "feature position"));
      } else {
        features.push_back(detail::parse_vec3(f, "feature"));
      }
    }
  }

  std::vector<SphereObstacle> spheres;
  std::vector<BoxObstacle> boxes;
  if (j.contains("obstacles")) {
    for (const auto& o : j["obstacles"]) {
      const std::string type = o.at("type").get<std::string>();
      if (type == "sphere") {
        spheres.push_back({detail::parse_vec3(o.at("center"), "sphere center"),
                           o.at("radius").get<double>()});
      } else if (type == "box") {
        boxes.push_back({detail::parse_vec3(o.at("min"), "box min"),
                         detail::parse_vec3(o.at("max"), "box max")});
      } else {
        throw std::invalid_argument("scene: unknown obstacle type '" + type + "'");
      }
    }
  }
  const double res = j.value("grid_resolution", 0.2);
  return Environment(bounds, std::move(features), std::move(spheres), std::move(boxes), res);
}

/// Cubic-cell occupancy grid over the scene bounds. A cell is blocked when its
/// center leaves the bounds or has clearance below the margin. Exposed so the
/// search and its oracle can run on the identical grid.
struct OccupancyGrid {
  Eigen::Vector3d origin;
  double resolution;
  std::array<int, 3> dims;
  std::vector<std::uint8_t> blocked;

  int index(int i, int j, int k) const { return (i * dims[1] + j) * dims[2] + k; }
  bool in_grid(int i, int j, int k) const {
    return i >= 0 && i < dims[0] && j >= 0 && j < dims[1] && k >= 0 && k < dims[2];
  }
  bool free_cell(int i, int j, int k) const { return in_grid(i, j, k) && !blocked[index(i, j, k)]; }
  Eigen::Vector3d center(int i, int j, int k) const {
    return origin + resolution * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
  }
  std::array<int, 3> cell_of(const Eigen::Vector3d& p) const {
    std::array<int, 3> c;
    for (int a = 0; a < 3; ++a) {
      c[a] = std::min(dims[a] - 1,
                      std::max(0, static_cast<int>(std::floor((p(a) - origin(a)) / resolution))));
    }
    return c;
  }
};

inline OccupancyGrid build_occupancy_grid(const Environment& env, double margin) {
  OccupancyGrid g;
  g.origin = env.bounds().min;
  g.resolution = env.grid_resolution();
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = std::max(
        1, static_cast<int>(std::ceil((env.bounds().max(a) - g.origin(a)) / g.resolution - 1e-9)));
  }
  g.blocked.assign(static_cast<size_t>(g.dims[0]) * g.dims[1] * g.dims[2], 0);
  for (int i = 0; i < g.dims[0]; ++i) {
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int k = 0; k < g.dims[2]; ++k) {
        const Eigen::Vector3d c = g.center(i, j, k);
        bool bad = !env.bounds().contains(c);
        if (!bad) bad = env.clearance(c) < margin;
        g.blocked[g.index(i, j, k)] = bad ? 1 : 0;
      }
    }
  }
  return g;
}

namespace detail {

struct GridPathResult {
  std::vector<std::array<int, 3>> cells;
  // Step counts by axis-distance class (face, edge, corner); the canonical
  // path cost is (n1 + n2*sqrt(2) + n3*sqrt(3)) * resolution.
  std::array<int, 3> step_counts{0, 0, 0};
};

inline double canonical_cost(const std::array<int, 3>& counts, double resolution) {
  return (counts[0] + counts[1] * std::sqrt(2.0) + counts[2] * std::sqrt(3.0)) * resolution;
}

/// 26-connected A* with straight-line heuristic. start/goal cells are treated
/// as free (their true clearance is validated by the caller).
inline GridPathResult astar_grid_path(const OccupancyGrid& grid, const std::array<int, 3>& start,
                                      const std::array<int, 3>& goal) {
  const int total = grid.dims[0] * grid.dims[1] * grid.dims[2];
  const int start_idx = grid.index(start[0], start[1], start[2]);
  const int goal_idx = grid.index(goal[0], goal[1], goal[2]);
  const Eigen::Vector3d goal_center = grid.center(goal[0], goal[1], goal[2]);

  std::vector<double> g_cost(total, std::numeric_limits<double>::infinity());
  std::vector<int> parent(total, -1);
  std::vector<std::uint8_t> closed(total, 0);

  using QueueEntry = std::pair<double, int>;  // (f, index), min-heap
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> open;
  g_cost[start_idx] = 0.0;
  open.emplace((grid.center(start[0], start[1], start[2]) - goal_center).norm(), start_idx);

  auto decode = [&](int idx) {
    std::array<int, 3> c;
    c[2] = idx % grid.dims[2];
    c[1] = (idx / grid.dims[2]) % grid.dims[1];
    c[0] = idx / (grid.dims[1] * grid.dims[2]);
    return c;
  };

  bool found = false;
  while (!open.empty()) {
    const auto [f, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (idx == goal_idx) {
      found = true;
      break;
    }
    const auto c = decode(idx);
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int dk = -1; dk <= 1; ++dk) {
          if (di == 0 && dj == 0 && dk == 0) continue;
          const int ni = c[0] + di, nj = c[1] + dj, nk = c[2] + dk;
          if (!grid.in_grid(ni, nj, nk)) continue;
          const int nidx = grid.index(ni, nj, nk);
          if (closed[nidx]) continue;
          if (grid.blocked[nidx] && nidx != goal_idx && nidx != start_idx) continue;
          const double step =
              grid.resolution * std::sqrt(double(di * di + dj * dj + dk * dk));
          const double cand = g_cost[idx] + step;
          if (cand < g_cost[nidx]) {
            g_cost[nidx] = cand;
            parent[nidx] = idx;
            open.emplace(cand + (grid.center(ni, nj, nk) - goal_center).norm(), nidx);
          }
        }
      }
    }
  }

  if (!found) {
    throw infeasible_error("astar_grid_path: goal unreachable on the occupancy grid");
  }

  GridPathResult result;
  for (int idx = goal_idx; idx != -1; idx = parent[idx]) result.cells.push_back(decode(idx));
  std::reverse(result.cells.begin(), result.cells.end());
  for (size_t i = 1; i < result.cells.size(); ++i) {
    const auto& a = result.cells[i - 1];
    const auto& b = result.cells[i];
    const int cls = std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
    result.step_counts[cls - 1] += 1;
  }
  return result;
}

}  // namespace detail

/// Grid A* between start and goal followed by greedy line-of-sight
/// shortcutting. Every returned waypoint keeps at least the requested margin
/// of clearance.
inline std::vector<Eigen::Vector3d> Environment::astar_initial_path(const Eigen::Vector3d& start,
                                                                    const Eigen::Vector3d& goal,
                                                                    double margin) const {
  if (!bounds_.contains(start) || clearance(start) < margin) {
    throw std::invalid_argument("astar_initial_path: start is blocked or out of bounds");
  }
  if (!bounds_.contains(goal) || clearance(goal) < margin) {
    throw std::invalid_argument("astar_initial_path: goal is blocked or out of bounds");
  }

  const OccupancyGrid grid = build_occupancy_grid(*this, margin);
  const auto start_cell = grid.cell_of(start);
  const auto goal_cell = grid.cell_of(goal);

  std::vector<Eigen::Vector3d> raw;
  raw.push_back(start);
  if (start_cell != goal_cell) {
    const auto grid_path = detail::astar_grid_path(grid, start_cell, goal_cell);
    for (size_t i = 1; i + 1 < grid_path.cells.size(); ++i) {
      const auto& c = grid_path.cells[i];
      raw.push_back(grid.center(c[0], c[1], c[2]));
    }
  }
  raw.push_back(goal);

  // Greedy line-of-sight shortcutting on the raw waypoints.
  auto segment_clear = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    const double len = (b - a).norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(len / (0.5 * grid_resolution_))));
    for (int s = 0; s <= steps; ++s) {
      const Eigen::Vector3d p = a + (b - a) * (double(s) / steps);
      if (!bounds_.contains(p) || clearance(p) < margin) return false;
    }
    return true;
  };

  std::vector<Eigen::Vector3d> shortcut;
  size_t i = 0;
  shortcut.push_back(raw.front());
  while (i + 1 < raw.size()) {
    size_t j = raw.size() - 1;
    while (j > i + 1 && !segment_clear(raw[i], raw[j])) --j;
    shortcut.push_back(raw[j]);
    i = j;
  }
  return shortcut;
}

}  // namespace visplan

#endif  // VISPLAN_ENVIRONMENT_HPP_
