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

#ifndef VISPLAN_OPTIMIZE_HPP_
#define VISPLAN_OPTIMIZE_HPP_

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace visplan {

struct DescentOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double relative_cost_tolerance = 1e-9;
  int history = 8;               // L-BFGS memory
  int max_line_search_steps = 40;
  double armijo_c1 = 1e-4;
  double step_shrink = 0.5;
};

struct DescentResult {
  Eigen::VectorXd x;       // best iterate by cost
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

/// Limited-memory quasi-Newton descent with Armijo backtracking. The callable
/// returns the cost and fills the gradient; it may return +inf (or throw) for
/// an unevaluable trial point, which the line search treats as a rejection.
/// The best iterate seen is returned even when the loop stops without
/// converging.
template <typename F, typename Callback = std::nullptr_t>
DescentResult minimize(F&& eval, Eigen::VectorXd x0, const DescentOptions& opts,
                       Callback&& per_iteration = nullptr) {
  const auto inf = std::numeric_limits<double>::infinity();
  auto safe_eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
    try {
      const double c = eval(x, grad);
      return std::isfinite(c) ? c : inf;
    } catch (const std::exception&) {
      return inf;
    }
  };

  const int n = static_cast<int>(x0.size());
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd grad(n);
  double cost = safe_eval(x, grad);
  if (!std::isfinite(cost)) {
    DescentResult r;
    r.x = x;
    r.cost = cost;
    r.stop_reason = "initial point not evaluable";
    return r;
  }

  DescentResult best;
  best.x = x;
  best.cost = cost;

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (grad.norm() < opts.gradient_tolerance) {
      best.converged = true;
      best.stop_reason = "gradient norm below tolerance";
      best.iterations = iter;
      return best;
    }

    // Two-loop recursion for the search direction.
    Eigen::VectorXd d = -grad;
    if (!s_hist.empty()) {
      std::vector<double> alpha(s_hist.size());
      for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
        alpha[i] = rho_hist[i] * s_hist[i].dot(d);
        d -= alpha[i] * y_hist[i];
      }
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      d *= gamma;
      for (size_t i = 0; i < s_hist.size(); ++i) {
        const double beta = rho_hist[i] * y_hist[i].dot(d);
        d += (alpha[i] - beta) * s_hist[i];
      }
    }
    double directional = grad.dot(d);
    if (!(directional < 0.0)) {  // not a descent direction: restart from steepest
      d = -grad;
      directional = grad.dot(d);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    Eigen::VectorXd trial_grad(n);
    Eigen::VectorXd trial;
    double trial_cost = inf;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search_steps; ++ls) {
      trial = x + step * d;
      trial_cost = safe_eval(trial, trial_grad);
      if (trial_cost <= cost + opts.armijo_c1 * step * directional) {
        accepted = true;
        break;
      }
      step *= opts.step_shrink;
    }
    if (!accepted) {
      best.stop_reason = "line search failed";
      best.iterations = iter;
      return best;
    }

    const Eigen::VectorXd s = trial - x;
    const Eigen::VectorXd y = trial_grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double prev_cost = cost;
    x = trial;
    cost = trial_cost;
    grad = trial_grad;
    if (cost < best.cost) {
      best.x = x;
      best.cost = cost;
    }
    if constexpr (!std::is_same_v<std::decay_t<Callback>, std::nullptr_t>) {
      per_iteration(iter, x, cost, grad.norm());
    }
    if (std::abs(prev_cost - cost) <= opts.relative_cost_tolerance *
                                          std::max(1.0, std::abs(prev_cost))) {
      best.converged = true;
      best.stop_reason = "relative cost change below tolerance";
      best.iterations = iter + 1;
      return best;
    }
  }
  best.stop_reason = "max iterations reached";
  best.iterations = opts.max_iterations;
  return best;
}

}  // namespace visplan

#endif  // VISPLAN_OPTIMIZE_HPP_
