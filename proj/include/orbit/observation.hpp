#pragma once

#include <Eigen/Dense>
#include <utility>

#include "orbit/lie.hpp"

namespace orbit {

// A labeled point cloud: N ordered points in R^d, one row per point.
// Point order is part of the identity of the observation.
struct Observation {
  Observation() = default;
  explicit Observation(Matrix points_in) : points(std::move(points_in)) {
    if (points.rows() < 1) throw DimError("observation needs >= 1 point");
    if (points.cols() < 1) throw DimError("observation needs dim >= 1");
    if (!points.allFinite()) throw DomainError("non-finite observation");
  }

  int count() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  int flat_dim() const { return count() * dim(); }

  // Point-major flattening: (x1, y1, x2, y2, ...).
  Vector flat() const {
    Vector out(flat_dim());
    for (int i = 0; i < count(); ++i)
      out.segment(static_cast<Eigen::Index>(i) * dim(), dim()) =
          points.row(i).transpose();
    return out;
  }

  static Observation from_flat(const Vector& v, int dim) {
    if (dim < 1 || v.size() % dim != 0)
      throw DimError("flat size is not a multiple of the point dim");
    Matrix pts(v.size() / dim, dim);
    for (int i = 0; i < pts.rows(); ++i)
      pts.row(i) = v.segment(static_cast<Eigen::Index>(i) * dim, dim)
                       .transpose();
    return Observation(pts);
  }

  Matrix points;
};

// Difference of two observations.  A separate kind on purpose: differences
// transform through the linear block only, so errors never pick up the
// translation twice.
struct ObservationDelta {
  ObservationDelta() = default;
  explicit ObservationDelta(Matrix rows_in) : rows(std::move(rows_in)) {
    if (!rows.allFinite()) throw DomainError("non-finite delta");
  }

  int count() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }

  Vector flat() const {
    Vector out(static_cast<Eigen::Index>(count()) * dim());
    for (int i = 0; i < count(); ++i)
      out.segment(static_cast<Eigen::Index>(i) * dim(), dim()) =
          rows.row(i).transpose();
    return out;
  }

  static ObservationDelta from_flat(const Vector& v, int dim) {
    if (dim < 1 || v.size() % dim != 0)
      throw DimError("flat size is not a multiple of the point dim");
    Matrix rows(v.size() / dim, dim);
    for (int i = 0; i < rows.rows(); ++i)
      rows.row(i) =
          v.segment(static_cast<Eigen::Index>(i) * dim, dim).transpose();
    return ObservationDelta(rows);
  }

  double norm() const { return rows.norm(); }

  Matrix rows;
};

inline ObservationDelta operator-(const Observation& a, const Observation& b) {
  if (a.count() != b.count() || a.dim() != b.dim())
    throw DimError("observation shapes differ");
  return ObservationDelta(a.points - b.points);
}

inline Observation operator+(const Observation& a, const ObservationDelta& d) {
  if (a.count() != d.count() || a.dim() != d.dim())
    throw DimError("observation/delta shapes differ");
  return Observation(a.points + d.rows);
}

// p' = L p + t for every point, preserving count and order.
inline Observation act(const GroupElement& g, const Observation& obs) {
  const int d = g.basis()->ambient_dim();
  if (obs.dim() != d) throw DimError("act: point dim != basis ambient dim");
  Matrix out = obs.points * g.linear().transpose();
  out.rowwise() += g.translation().transpose();
  return Observation(std::move(out));
}

// Differential of the action: the linear block alone.
inline ObservationDelta act_linear(const GroupElement& g,
                                   const ObservationDelta& delta) {
  const int d = g.basis()->ambient_dim();
  if (delta.dim() != d)
    throw DimError("act_linear: dim != basis ambient dim");
  return ObservationDelta(delta.rows * g.linear().transpose());
}

// Velocity field of generator a at obs, flattened point-major:
// per point, (linear block of T_a) p + translation column of T_a.
inline Vector induced_velocity(const BasisPtr& basis, int a,
                               const Observation& obs) {
  const int d = basis->ambient_dim();
  if (obs.dim() != d)
    throw DimError("induced_velocity: point dim != basis ambient dim");
  const Matrix& t = basis->generator(a);  // IndexError if out of range
  Matrix rows = obs.points * t.topLeftCorner(d, d).transpose();
  const Vector shift = t.topRightCorner(d, 1);
  rows.rowwise() += shift.transpose();
  return ObservationDelta(std::move(rows)).flat();
}

// sum_a w_a V_a(obs); exact by linearity of each field in the generator.
inline Vector induced_velocity(const AlgebraVector& w, const Observation& obs) {
  const int d = w.basis->ambient_dim();
  if (obs.dim() != d)
    throw DimError("induced_velocity: point dim != basis ambient dim");
  const Matrix t = w.matrix();
  Matrix rows = obs.points * t.topLeftCorner(d, d).transpose();
  const Vector shift = t.topRightCorner(d, 1);
  rows.rowwise() += shift.transpose();
  return ObservationDelta(std::move(rows)).flat();
}

}  // namespace orbit
