#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "orbit/lie.hpp"
#include "orbit/rng.hpp"

namespace orbit {

// Which span a level's realize projector targets: its own new directions
// (coset) or the remainder subalgebra (subgroup).
enum class ProjectorSemantics { kCoset, kSubgroup };

inline const char* to_string(ProjectorSemantics s) {
  return s == ProjectorSemantics::kCoset ? "coset" : "subgroup";
}

struct ProjectorPair {
  int level = 0;
  Matrix P;
  Matrix Q;  // complement, Q = I - P
};

// A strictly decreasing chain of subalgebras h_0 > h_1 > ... > h_L = {} given
// by generator index sets, with the derived per-level coset sets
// a_k = h_{k-1} \ h_k.
class Flag {
 public:
  Flag(BasisPtr basis, std::vector<std::vector<int>> level_sets, Matrix inner)
      : basis_(std::move(basis)),
        levels_(std::move(level_sets)),
        inner_(std::move(inner)) {
    validate();
    derive();
  }

  const BasisPtr& basis() const { return basis_; }
  int depth() const { return static_cast<int>(levels_.size()) - 1; }  // L
  const std::vector<int>& subalgebra(int k) const {  // h_k, k in 0..L
    if (k < 0 || k > depth()) throw IndexError("flag: level out of range");
    return levels_[k];
  }
  const std::vector<int>& coset(int k) const {  // a_k, k in 1..L
    if (k < 1 || k > depth()) throw IndexError("flag: level out of range");
    return cosets_[k - 1];
  }
  // Generators of h_k whose bracket action preserves every coordinate block
  // of the flag; Ad of their one-parameter subgroups commutes with each
  // level projector, so invariance is checked over exactly this set.
  const std::vector<int>& ad_check_set(int k) const {
    if (k < 1 || k > depth()) throw IndexError("flag: level out of range");
    return ad_check_[k - 1];
  }
  const Matrix& inner_product() const { return inner_; }

 private:
  void validate() {
    if (!basis_) throw ConfigError("flag: null basis");
    const int r = basis_->dim();
    if (levels_.size() < 2)
      throw NestingError("flag: need at least h_0 and the empty tail");
    for (auto& set : levels_) {
      std::sort(set.begin(), set.end());
      if (std::adjacent_find(set.begin(), set.end()) != set.end())
        throw IndexError("flag: repeated generator index in a level");
      for (int a : set)
        if (a < 0 || a >= r) throw IndexError("flag: generator index range");
    }
    if (!levels_.back().empty())
      throw NestingError("flag: last level must be the empty set");
    for (std::size_t k = 1; k < levels_.size(); ++k) {
      if (!std::includes(levels_[k - 1].begin(), levels_[k - 1].end(),
                         levels_[k].begin(), levels_[k].end()))
        throw NestingError("flag: levels are not nested");
      if (levels_[k].size() == levels_[k - 1].size())
        throw NestingError("flag: nesting must be strict");
    }
    for (std::size_t k = 0; k < levels_.size(); ++k) {
      for (int a : levels_[k]) {
        for (int b : levels_[k]) {
          const Vector c = basis_->commutator_coords(a, b);
          for (int idx = 0; idx < c.size(); ++idx) {
            if (std::abs(c[idx]) <= 1e-10) continue;
            if (!std::binary_search(levels_[k].begin(), levels_[k].end(),
                                    idx))
              throw SubalgebraClosureError(
                  "flag: level " + std::to_string(k) + " is not closed: [" +
                  basis_->label(a) + ", " + basis_->label(b) + "] has a " +
                  basis_->label(idx) + " component");
          }
        }
      }
    }
    const int rr = basis_->dim();
    if (inner_.size() == 0) inner_ = Matrix::Identity(rr, rr);
    if (inner_.rows() != rr || inner_.cols() != rr)
      throw DimError("flag: inner product size != basis dim");
    if ((inner_ - inner_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ConfigError("flag: inner product must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(inner_);
    if (es.eigenvalues().minCoeff() <= 0)
      throw ConfigError("flag: inner product must be positive definite");
  }

  void derive() {
    const int r = basis_->dim();
    for (int k = 1; k <= depth(); ++k) {
      std::vector<int> a;
      std::set_difference(levels_[k - 1].begin(), levels_[k - 1].end(),
                          levels_[k].begin(), levels_[k].end(),
                          std::back_inserter(a));
      cosets_.push_back(std::move(a));
    }

    // Coordinate blocks: each coset plus everything outside h_0.
    std::vector<std::vector<int>> blocks = cosets_;
    std::vector<int> outside;
    for (int idx = 0; idx < r; ++idx)
      if (!std::binary_search(levels_[0].begin(), levels_[0].end(), idx))
        outside.push_back(idx);
    if (!outside.empty()) blocks.push_back(outside);

    auto preserves_blocks = [&](int i) {
      for (const auto& block : blocks) {
        for (int b : block) {
          const Vector c = basis_->commutator_coords(i, b);
          for (int idx = 0; idx < c.size(); ++idx) {
            if (std::abs(c[idx]) <= 1e-10) continue;
            if (std::find(block.begin(), block.end(), idx) == block.end())
              return false;
          }
        }
      }
      return true;
    };

    for (int k = 1; k <= depth(); ++k) {
      std::vector<int> checked;
      for (int i : levels_[k])
        if (preserves_blocks(i)) checked.push_back(i);
      ad_check_.push_back(std::move(checked));
    }
  }

  BasisPtr basis_;
  std::vector<std::vector<int>> levels_;
  std::vector<std::vector<int>> cosets_;
  std::vector<std::vector<int>> ad_check_;
  Matrix inner_;
};

inline Flag build_flag(const BasisPtr& basis,
                       std::vector<std::vector<int>> level_sets,
                       Matrix inner_product = Matrix()) {
  return Flag(basis, std::move(level_sets), std::move(inner_product));
}

// Orthogonal projector onto span{e_i : i in S} with respect to the flag's
// inner product G: P = E (E^T G E)^{-1} E^T G, Q = I - P.
inline ProjectorPair projector(const Flag& flag, int k,
                               ProjectorSemantics semantics) {
  const int r = flag.basis()->dim();
  const std::vector<int>& set =
      semantics == ProjectorSemantics::kCoset ? flag.coset(k)
                                              : flag.subalgebra(k);
  Matrix p = Matrix::Zero(r, r);
  if (!set.empty()) {
    Matrix e = Matrix::Zero(r, static_cast<Eigen::Index>(set.size()));
    for (std::size_t j = 0; j < set.size(); ++j) e(set[j], j) = 1.0;
    const Matrix& g = flag.inner_product();
    const Matrix gram = e.transpose() * g * e;
    p = e * gram.ldlt().solve(e.transpose() * g);
  }
  return {k, p, Matrix::Identity(r, r) - p};
}

// Measured max commutation defect ||P Ad(h) - Ad(h) P|| over seeded h drawn
// from exp of the given index span.
inline double ad_commutation_defect(const Flag& flag, const ProjectorPair& pp,
                                    const std::vector<int>& span_set,
                                    int samples = 20,
                                    std::uint64_t seed = 2026) {
  if (span_set.empty()) return 0.0;
  const BasisPtr& basis = flag.basis();
  const int r = basis->dim();
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(pp.level),
                        static_cast<std::uint64_t>(s)));
    Vector v = Vector::Zero(r);
    for (int i : span_set) v[i] = rng.normal();
    const double nrm = v.norm();
    if (nrm > 0) v *= rng.uniform_pos() / nrm;  // norm <= 1
    const Matrix ad = adjoint(exp_map(AlgebraVector(basis, v)));
    worst = std::max(worst, (pp.P * ad - ad * pp.P).norm());
  }
  return worst;
}

struct FlagLevelReport {
  int level = 0;
  std::vector<std::string> coset_labels;
  double projector_defect = 0.0;    // idempotency + G-symmetry + P+Q-I
  double ad_defect_declared = 0.0;  // over the flag-preserving subgroup
  double ad_defect_subalgebra = 0.0;  // over all of h_k, reported as-is
};

inline std::vector<FlagLevelReport> hierarchy_report(
    const Flag& flag, ProjectorSemantics semantics, int samples = 20,
    std::uint64_t seed = 2026) {
  std::vector<FlagLevelReport> out;
  const Matrix& g = flag.inner_product();
  for (int k = 1; k <= flag.depth(); ++k) {
    const ProjectorPair pp = projector(flag, k, semantics);
    FlagLevelReport rep;
    rep.level = k;
    for (int a : flag.coset(k))
      rep.coset_labels.push_back(flag.basis()->label(a));
    const int r = flag.basis()->dim();
    rep.projector_defect = std::max(
        {(pp.P * pp.P - pp.P).cwiseAbs().maxCoeff(),
         (g * pp.P - pp.P.transpose() * g).cwiseAbs().maxCoeff(),
         (pp.P + pp.Q - Matrix::Identity(r, r)).cwiseAbs().maxCoeff()});
    rep.ad_defect_declared =
        ad_commutation_defect(flag, pp, flag.ad_check_set(k), samples, seed);
    rep.ad_defect_subalgebra =
        ad_commutation_defect(flag, pp, flag.subalgebra(k), samples, seed);
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace orbit
