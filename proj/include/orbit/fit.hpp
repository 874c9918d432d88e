#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "orbit/lie.hpp"
#include "orbit/observation.hpp"

namespace orbit {

// Jacobian of eta -> act(g * exp(sum eta_a T_a), reference) at eta = 0,
// restricted to the given generator indices.  Column a is the velocity field
// of T_a at the reference, pushed forward by the linear block of g, which is
// exactly d/ds act(g exp(s T_a), reference).
inline Matrix fit_jacobian(const GroupElement& g, const Observation& reference,
                           const std::vector<int>& dims) {
  const BasisPtr& basis = g.basis();
  Matrix j(reference.flat_dim(), static_cast<Eigen::Index>(dims.size()));
  for (std::size_t c = 0; c < dims.size(); ++c) {
    const Vector v = induced_velocity(basis, dims[c], reference);
    j.col(static_cast<Eigen::Index>(c)) =
        act_linear(g, ObservationDelta::from_flat(v, reference.dim())).flat();
  }
  return j;
}

// Ridge-regularized least squares.  lambda = 0 falls back to a rank-revealing
// solve and refuses rank-deficient systems.
inline Vector solve_tikhonov(const Matrix& j, const Vector& rhs,
                             double lambda) {
  if (lambda < 0) throw ConfigError("fit: lambda must be >= 0");
  if (j.cols() == 0) return Vector();
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(j);
    if (qr.rank() < j.cols())
      throw SingularFit("fit: rank-deficient system with lambda = 0");
    return qr.solve(rhs);
  }
  const Matrix normal =
      j.transpose() * j + lambda * Matrix::Identity(j.cols(), j.cols());
  return normal.ldlt().solve(j.transpose() * rhs);
}

// One Gauss-Newton step for target ~ act(g * exp(eta), reference) over the
// permitted directions; returns eta embedded in the full basis.
inline Vector fit_step(const GroupElement& g, const Observation& reference,
                       const Observation& target,
                       const std::vector<int>& dims, double lambda) {
  if (target.count() != reference.count() || target.dim() != reference.dim())
    throw DimError("fit: target/reference shapes differ");
  const Vector rhs = (target - act(g, reference)).flat();
  const Matrix j = fit_jacobian(g, reference, dims);
  const Vector eta = solve_tikhonov(j, rhs, lambda);
  Vector full = Vector::Zero(g.basis()->dim());
  for (std::size_t c = 0; c < dims.size(); ++c) full[dims[c]] = eta[c];
  return full;
}

struct LabelFit {
  GroupElement g;
  int iterations = 0;
  bool converged = false;
};

// Iterated refinement of a group label explaining target from reference.
inline LabelFit fit_group_label(const Observation& reference,
                                const Observation& target,
                                const GroupElement& init,
                                const std::vector<int>& dims,
                                double lambda = 1e-9, int max_iters = 12,
                                double tol = 1e-13) {
  LabelFit out{init, 0, false};
  for (int it = 0; it < max_iters; ++it) {
    const Vector eta = fit_step(out.g, reference, target, dims, lambda);
    out.g = compose(out.g, exp_map(AlgebraVector(out.g.basis(), eta)));
    ++out.iterations;
    if (eta.norm() <= tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

inline std::vector<int> all_dims(const BasisPtr& basis) {
  std::vector<int> dims(basis->dim());
  for (int a = 0; a < basis->dim(); ++a) dims[a] = a;
  return dims;
}

// Chart coordinates of g, or nothing when g sits outside the log branch.
inline std::optional<Vector> label_coords(const GroupElement& g) {
  try {
    return log_map(g).coeffs;
  } catch (const LogBranchError&) {
    return std::nullopt;
  }
}

}  // namespace orbit
