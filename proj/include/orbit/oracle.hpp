#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "orbit/lie.hpp"
#include "orbit/observation.hpp"
#include "orbit/tracker.hpp"

namespace orbit {

// Brute-force references.  These are deliberately slow, seed-free and written
// as direct transcriptions of the defining formulas; they share no solver
// code with the fast paths they are used to check.

// Exhaustive minimizer of ||act(exp(eta), reference) - target|| over a
// uniform grid on the active coordinates.  Grid points are visited in
// lexicographic order and the strict < keeps the lexicographically smallest
// minimizer, so ties break deterministically.
inline AlgebraVector grid_fit(const BasisPtr& basis,
                              const std::vector<int>& active_dims,
                              const Observation& target,
                              const Observation& reference, double radius,
                              double step) {
  if (active_dims.empty() || active_dims.size() > 3)
    throw GridBudgetError("grid_fit: need 1..3 active dims");
  if (radius <= 0 || step <= 0)
    throw DomainError("grid_fit: radius and step must be > 0");
  const long half = std::lround(std::floor(radius / step));
  const long per_dim = 2 * half + 1;
  double nodes = 1.0;
  for (std::size_t i = 0; i < active_dims.size(); ++i) {
    nodes *= static_cast<double>(per_dim);
    if (nodes > 1e6)
      throw GridBudgetError("grid_fit: grid exceeds 1e6 nodes");
  }

  const int r = basis->dim();
  for (int a : active_dims)
    if (a < 0 || a >= r) throw IndexError("grid_fit: active dim out of range");

  Vector best = Vector::Zero(r);
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<long> idx(active_dims.size(), -half);
  while (true) {
    Vector eta = Vector::Zero(r);
    for (std::size_t i = 0; i < active_dims.size(); ++i)
      eta[active_dims[i]] = static_cast<double>(idx[i]) * step;
    const double cost =
        (act(exp_map(AlgebraVector(basis, eta)), reference) - target).norm();
    if (cost < best_cost) {
      best_cost = cost;
      best = eta;
    }
    std::size_t carry = active_dims.size();
    while (carry > 0) {
      if (++idx[carry - 1] <= half) break;
      idx[carry - 1] = -half;
      --carry;
    }
    if (carry == 0) break;
  }
  return {basis, best};
}

// Central difference of the action along the one-parameter subgroup of T_a.
inline Vector finite_diff_velocity(const BasisPtr& basis, int a,
                                   const Observation& obs, double eps) {
  if (eps <= 0) throw DomainError("finite_diff_velocity: eps must be > 0");
  Vector coeffs = Vector::Zero(basis->dim());
  coeffs[a] = eps;
  const Observation plus = act(exp_map(AlgebraVector(basis, coeffs)), obs);
  coeffs[a] = -eps;
  const Observation minus = act(exp_map(AlgebraVector(basis, coeffs)), obs);
  return (plus.flat() - minus.flat()) / (2.0 * eps);
}

// Reference trajectory at one hundredth of the configured step.  The vector
// field is re-expressed entry by entry rather than reusing the tracker's
// matrix form.
inline AgentState integrate_reference(const TrackerConfig& cfg,
                                      const AgentState& x0,
                                      const InputSampler& input, double T) {
  if (T <= 0) throw DomainError("integrate_reference: T must be > 0");
  const double h = cfg.dt / 100.0;
  const long steps = std::lround(T / h);
  const int p = cfg.populations();
  const Eigen::Index width = x0.pops.cols();

  auto field = [&](const Matrix& x, const Vector& in) {
    Matrix f(p, width);
    for (int i = 0; i < p; ++i)
      for (Eigen::Index c = 0; c < width; ++c) {
        double acc = -cfg.alpha * x(i, c) + cfg.b[i] * in[c];
        for (int j = 0; j < p; ++j) acc += cfg.W(i, j) * x(j, c);
        if (i == 0) acc -= cfg.kappa * (x(0, c) - in[c]);
        f(i, c) = acc;
      }
    return f;
  };

  AgentState x = x0;
  for (long n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * h;
    const Vector i0 = input(t).flat();
    const Vector i1 = input(t + 0.5 * h).flat();
    const Vector i2 = input(t + h).flat();
    const Matrix k1 = field(x.pops, i0);
    const Matrix k2 = field(x.pops + 0.5 * h * k1, i1);
    const Matrix k3 = field(x.pops + 0.5 * h * k2, i1);
    const Matrix k4 = field(x.pops + h * k3, i2);
    x.pops += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    x.t = static_cast<double>(n + 1) * h;
    if (!x.pops.allFinite())
      throw NumericalBlowup("integrate_reference: non-finite state at step " +
                                std::to_string(n),
                            n);
  }
  return x;
}

}  // namespace orbit
