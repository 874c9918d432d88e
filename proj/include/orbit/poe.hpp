#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "orbit/lie.hpp"
#include "orbit/observation.hpp"

namespace orbit {

// One joint of a product-of-exponentials chain: a unit screw twist, a home
// offset placing the link frame, and optional marker points rigidly attached
// to that link.
struct PoeJoint {
  AlgebraVector twist;
  GroupElement home_offset;
  std::optional<Observation> markers;
};

struct PoeChain {
  std::vector<PoeJoint> joints;
  GroupElement home_pose;
  Observation end_markers;
};

namespace detail {

// Unit screw: either |omega| = 1 or a pure unit translation.
inline void validate_twist(const AlgebraVector& twist) {
  const std::string& name = twist.basis->name();
  int rot_dims = 0;
  if (name == "se2")
    rot_dims = 1;
  else if (name == "se3")
    rot_dims = 3;
  else
    throw ConfigError("poe: twists must live in se2 or se3");
  const double w = twist.coeffs.head(rot_dims).norm();
  const double v = twist.coeffs.tail(twist.coeffs.size() - rot_dims).norm();
  if (std::abs(w - 1.0) <= 1e-9) return;
  if (w <= 1e-12 && std::abs(v - 1.0) <= 1e-9) return;
  throw ConfigError("poe: twist is not a unit screw");
}

}  // namespace detail

inline PoeChain make_poe_chain(std::vector<PoeJoint> joints,
                               GroupElement home_pose,
                               Observation end_markers) {
  if (joints.empty()) throw ConfigError("poe: chain needs >= 1 joint");
  const BasisPtr& basis = home_pose.basis();
  for (const auto& j : joints) {
    require_same_basis(j.twist.basis, basis, "make_poe_chain");
    require_same_basis(j.home_offset.basis(), basis, "make_poe_chain");
    detail::validate_twist(j.twist);
    if (j.markers && j.markers->dim() != basis->ambient_dim())
      throw DimError("poe: marker dim != ambient dim");
  }
  if (end_markers.dim() != basis->ambient_dim())
    throw DimError("poe: marker dim != ambient dim");
  return {std::move(joints), std::move(home_pose), std::move(end_markers)};
}

struct PoeResult {
  GroupElement end_frame;
  Observation markers;                    // link markers in order, then end
  std::vector<GroupElement> link_frames;  // partial product * home offset
};

// end = exp(theta_1 S_1) * ... * exp(theta_J S_J) * M.  Zero angles return
// the home pose exactly.
inline PoeResult poe_forward(const PoeChain& chain, const Vector& angles) {
  const auto joint_count = static_cast<Eigen::Index>(chain.joints.size());
  if (angles.size() != joint_count)
    throw DimError("poe_forward: angle count != joint count");
  if (!angles.allFinite()) throw DomainError("poe_forward: non-finite angles");

  const BasisPtr& basis = chain.home_pose.basis();
  GroupElement partial = GroupElement::identity(basis);
  std::vector<GroupElement> link_frames;
  std::vector<const Observation*> clouds;
  link_frames.reserve(chain.joints.size());

  int marker_rows = 0;
  for (Eigen::Index n = 0; n < joint_count; ++n) {
    const PoeJoint& joint = chain.joints[n];
    partial = compose(partial, exp_map(AlgebraVector(
                                   basis, joint.twist.coeffs * angles[n])));
    link_frames.push_back(compose(partial, joint.home_offset));
    if (joint.markers) marker_rows += joint.markers->count();
  }
  const GroupElement end_frame = compose(partial, chain.home_pose);
  marker_rows += chain.end_markers.count();

  Matrix rows(marker_rows, basis->ambient_dim());
  Eigen::Index at = 0;
  for (Eigen::Index n = 0; n < joint_count; ++n) {
    const auto& markers = chain.joints[n].markers;
    if (!markers) continue;
    const Observation placed = act(link_frames[n], *markers);
    rows.middleRows(at, placed.count()) = placed.points;
    at += placed.count();
  }
  const Observation placed_end = act(end_frame, chain.end_markers);
  rows.middleRows(at, placed_end.count()) = placed_end.points;

  return {end_frame, Observation(std::move(rows)), std::move(link_frames)};
}

}  // namespace orbit
