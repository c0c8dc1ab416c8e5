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

#ifndef VISPLAN_BSPLINE_HPP_
#define VISPLAN_BSPLINE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace visplan {

/// Constant basis matrix M_{p+1} of a uniform B-spline, degrees 0 through 3.
/// Row-times-column convention: C(u) = [1 u ... u^p] * M * [Q_k ... Q_{k+p}]^T
/// on a single span with local parameter u in [0, 1].
inline Eigen::MatrixXd bspline_basis_matrix(int degree) {
  Eigen::MatrixXd m(degree + 1, degree + 1);
  switch (degree) {
    case 0:
      m << 1.0;
      break;
    case 1:
      m << 1, 0,
          -1, 1;
      break;
    case 2:
      m << 1, 1, 0,
          -2, 2, 0,
           1, -2, 1;
      m /= 2.0;
      break;
    case 3:
      m << 1, 4, 1, 0,
          -3, 0, 3, 0,
           3, -6, 3, 0,
          -1, 3, -3, 1;
      m /= 6.0;
      break;
    default:
      throw std::invalid_argument("bspline_basis_matrix: degree must be in [0, 3], got " +
                                  std::to_string(degree));
  }
  return m;
}

/// Uniform B-spline of arbitrary dimension. The knot vector is implicit:
/// knot t_j = start_time + (j - degree) * knot_span, so the curve domain is
/// [start_time, start_time + num_spans * knot_span]. Control points are stored
/// one per column. Immutable after construction.
class UniformBSpline {
 public:
  UniformBSpline(int degree, Eigen::MatrixXd control_points, double knot_span,
                 double start_time = 0.0)
      : degree_(degree),
        control_points_(std::move(control_points)),
        knot_span_(knot_span),
        start_time_(start_time),
        basis_(bspline_basis_matrix(degree)) {
    if (control_points_.rows() < 1) {
      throw std::invalid_argument("UniformBSpline: control points must have dimension >= 1");
    }
    if (control_points_.cols() < degree_ + 1) {
      throw std::invalid_argument(
          "UniformBSpline: need at least degree+1 control points, got " +
          std::to_string(control_points_.cols()) + " for degree " + std::to_string(degree_));
    }
    if (!(knot_span_ > 0.0)) {
      throw std::invalid_argument("UniformBSpline: knot_span must be > 0");
    }
  }

  int degree() const { return degree_; }
  int dimension() const { return static_cast<int>(control_points_.rows()); }
  int num_control_points() const { return static_cast<int>(control_points_.cols()); }
  double knot_span() const { return knot_span_; }
  double start_time() const { return start_time_; }

  /// Number of polynomial spans, m - 2p with m = n + p + 1.
  int num_spans() const { return num_control_points() - degree_; }
  int num_knot_points() const { return num_spans() + 1; }
  double end_time() const { return start_time_ + num_spans() * knot_span_; }
  double duration() const { return num_spans() * knot_span_; }
  /// Time of the j-th knot point, j in [0, num_spans()].
  double knot_time(int j) const { return start_time_ + j * knot_span_; }

  const Eigen::MatrixXd& control_points() const { return control_points_; }

  /// Evaluates the curve via the matrix representation. The end of the domain
  /// maps to the last span with u = 1 so the closed interval is covered.
  Eigen::VectorXd eval(double t) const {
    const double slack = 1e-9 * std::max(1.0, std::abs(end_time()));
    if (t < start_time_ - slack || t > end_time() + slack) {
      std::ostringstream msg;
      msg << "UniformBSpline::eval: t = " << t << " outside domain [" << start_time_ << ", "
          << end_time() << "]";
      throw std::domain_error(msg.str());
    }
    double s = (t - start_time_) / knot_span_;
    int span = static_cast<int>(std::floor(s));
    span = std::max(0, std::min(span, num_spans() - 1));
    const double u = std::min(std::max(s - span, 0.0), 1.0);
    return control_points_.middleCols(span, degree_ + 1) * span_weights(u);
  }

  /// Basis weights of the p+1 active control points at local parameter u.
  Eigen::VectorXd span_weights(double u) const {
    Eigen::VectorXd powers(degree_ + 1);
    double up = 1.0;
    for (int i = 0; i <= degree_; ++i) {
      powers(i) = up;
      up *= u;
    }
    return basis_.transpose() * powers;
  }

  /// Derivative curve: degree p-1, control points (Q_{i+1} - Q_i) / knot_span,
  /// same knot span and domain.
  UniformBSpline derivative() const {
    if (degree_ == 0) {
      throw std::logic_error("UniformBSpline::derivative: degree-0 curve has no derivative curve");
    }
    const int n_pts = num_control_points() - 1;
    Eigen::MatrixXd diff(dimension(), n_pts);
    for (int i = 0; i < n_pts; ++i) {
      diff.col(i) = (control_points_.col(i + 1) - control_points_.col(i)) / knot_span_;
    }
    return UniformBSpline(degree_ - 1, std::move(diff), knot_span_, start_time_);
  }

  /// On-curve points at the knots, [C(t_p), ..., C(t_{m-p})]. For degree 3 the
  /// j-th knot point is (Q_j + 4 Q_{j+1} + Q_{j+2}) / 6.
  std::vector<Eigen::VectorXd> knot_points() const {
    const Eigen::VectorXd w_begin = span_weights(0.0);
    const Eigen::VectorXd w_end = span_weights(1.0);
    std::vector<Eigen::VectorXd> points;
    points.reserve(num_knot_points());
    for (int j = 0; j < num_spans(); ++j) {
      points.push_back(control_points_.middleCols(j, degree_ + 1) * w_begin);
    }
    points.push_back(control_points_.middleCols(num_spans() - 1, degree_ + 1) * w_end);
    return points;
  }

 private:
  int degree_;
  Eigen::MatrixXd control_points_;  // one column per control point
  double knot_span_;
  double start_time_;
  Eigen::MatrixXd basis_;
};

struct WaypointFit {
  UniformBSpline curve;
  double max_residual = 0.0;  // max distance between knot points and waypoints
};

/// Fits a degree-3 uniform B-spline through an ordered waypoint list: the
/// boundary positions and velocities are enforced exactly, interior waypoints
/// are matched by least squares on the knot points. K waypoints produce K+2
/// control points, which makes the interior system square; residuals are
/// reported for the caller to inspect.
inline WaypointFit fit_waypoints(const std::vector<Eigen::VectorXd>& waypoints, double knot_span,
                                 const Eigen::VectorXd& start_velocity,
                                 const Eigen::VectorXd& end_velocity, double start_time = 0.0) {
  const int k = static_cast<int>(waypoints.size());
  if (k < 2) {
    throw std::invalid_argument("fit_waypoints: need at least 2 waypoints, got " +
                                std::to_string(k));
  }
  if (!(knot_span > 0.0)) {
    throw std::invalid_argument("fit_waypoints: knot_span must be > 0");
  }
  const int dim = static_cast<int>(waypoints.front().size());
  for (const auto& w : waypoints) {
    if (w.size() != dim) throw std::invalid_argument("fit_waypoints: mixed waypoint dimensions");
  }
  if (start_velocity.size() != dim || end_velocity.size() != dim) {
    throw std::invalid_argument("fit_waypoints: velocity dimension mismatch");
  }

  const int n_ctrl = k + 2;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, n_ctrl);
  const double dt = knot_span;
  const Eigen::VectorXd& w0 = waypoints.front();
  const Eigen::VectorXd& we = waypoints.back();

  if (k == 2) {
    // Fully determined: both knots are boundary waypoints.
    Eigen::Matrix4d a;
    a << 1, 4, 1, 0,
        -3, 0, 3, 0,
         0, 1, 4, 1,
         0, -3, 0, 3;
    Eigen::MatrixXd b(4, dim);
    b.row(0) = 6.0 * w0.transpose();
    b.row(1) = 6.0 * dt * start_velocity.transpose();
    b.row(2) = 6.0 * we.transpose();
    b.row(3) = 6.0 * dt * end_velocity.transpose();
    Eigen::MatrixXd sol = a.colPivHouseholderQr().solve(b);
    q = sol.transpose();
  } else if (k == 3) {
    // The start and end eliminations would both claim Q_2; solve the square
    // 5x5 system (four boundary rows plus the middle knot row) directly.
    Eigen::Matrix<double, 5, 5> a;
    a << 1, 4, 1, 0, 0,
        -3, 0, 3, 0, 0,
         0, 1, 4, 1, 0,
         0, 0, 1, 4, 1,
         0, 0, -3, 0, 3;
    Eigen::MatrixXd b(5, dim);
    b.row(0) = 6.0 * w0.transpose();
    b.row(1) = 6.0 * dt * start_velocity.transpose();
    b.row(2) = 6.0 * waypoints[1].transpose();
    b.row(3) = 6.0 * we.transpose();
    b.row(4) = 6.0 * dt * end_velocity.transpose();
    Eigen::MatrixXd sol = a.colPivHouseholderQr().solve(b);
    q = sol.transpose();
  } else {
    // Boundary constraints pin Q_0, Q_2 to Q_1 and Q_{n-2}, Q_n to Q_{n-1}:
    //   Q_0 = 3 w_0 - dt v_s - 2 Q_1,   Q_2     = 3 w_0 + dt v_s - 2 Q_1,
    //   Q_n = 3 w_e + dt v_e - 2 Q_{n-1}, Q_{n-2} = 3 w_e - dt v_e - 2 Q_{n-1}.
    // The interior knot rows then form a square system in the free points.
    const int n = n_ctrl - 1;
    std::vector<int> free_idx;
    free_idx.push_back(1);
    for (int i = 3; i <= n - 3; ++i) free_idx.push_back(i);
    free_idx.push_back(n - 1);
    const int n_free = static_cast<int>(free_idx.size());

    std::vector<int> var_of(n_ctrl, -1);
    for (int v = 0; v < n_free; ++v) var_of[free_idx[v]] = v;

    // Affine form for every control point: Q_r = sum_v S(r,v) y_v + const_r.
    Eigen::MatrixXd shape = Eigen::MatrixXd::Zero(n_ctrl, n_free);
    Eigen::MatrixXd offset = Eigen::MatrixXd::Zero(n_ctrl, dim);
    for (int r = 0; r < n_ctrl; ++r) {
      if (var_of[r] >= 0) {
        shape(r, var_of[r]) = 1.0;
      } else if (r == 0) {
        shape(r, var_of[1]) = -2.0;
        offset.row(r) = (3.0 * w0 - dt * start_velocity).transpose();
      } else if (r == 2) {
        shape(r, var_of[1]) = -2.0;
        offset.row(r) = (3.0 * w0 + dt * start_velocity).transpose();
      } else if (r == n - 2) {
        shape(r, var_of[n - 1]) = -2.0;
        offset.row(r) = (3.0 * we - dt * end_velocity).transpose();
      } else {  // r == n
        shape(r, var_of[n - 1]) = -2.0;
        offset.row(r) = (3.0 * we + dt * end_velocity).transpose();
      }
    }

    // Interior knot rows: (Q_j + 4 Q_{j+1} + Q_{j+2}) / 6 = w_j, j = 1..k-2.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k - 2, n_free);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k - 2, dim);
    const double coef[3] = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
    for (int j = 1; j <= k - 2; ++j) {
      const int row = j - 1;
      b.row(row) = waypoints[j].transpose();
      for (int o = 0; o < 3; ++o) {
        a.row(row) += coef[o] * shape.row(j + o);
        b.row(row) -= coef[o] * offset.row(j + o);
      }
    }
    Eigen::MatrixXd y = a.colPivHouseholderQr().solve(b);
    Eigen::MatrixXd full = shape * y + offset;  // n_ctrl x dim
    q = full.transpose();
  }

  WaypointFit fit{UniformBSpline(3, std::move(q), knot_span, start_time), 0.0};
  const auto knots = fit.curve.knot_points();
  for (int j = 0; j < k; ++j) {
    fit.max_residual = std::max(fit.max_residual, (knots[j] - waypoints[j]).norm());
  }
  return fit;
}

}  // namespace visplan

#endif  // VISPLAN_BSPLINE_HPP_
