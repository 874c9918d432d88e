#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "orbit/fit.hpp"
#include "orbit/flag.hpp"
#include "orbit/lie.hpp"
#include "orbit/observation.hpp"
#include "orbit/pooling.hpp"

namespace orbit {

// One level of the hierarchical loop.  The hypothesis delta stays in the
// exponential of the level's own directions (the realize projector's range);
// fit_dims additionally spans the directions forwarded upward.
struct LevelState {
  int k = 1;
  GroupElement delta;
  Observation template_obs;
  ProjectorPair projectors;
  std::vector<int> fit_dims;
  double tikhonov_lambda = 1e-6;
  std::optional<PoolingSpec> pooling;  // to level k+1; absent at the top
  Vector last_eta;     // most recent fit, kept for algebra-space messages
  double span_defect = 0.0;  // off-span content of log(delta), diagnostic

  LevelState(int level, const BasisPtr& basis, Observation tmpl,
             ProjectorPair proj, std::vector<int> dims, double lambda,
             std::optional<PoolingSpec> pool)
      : k(level),
        delta(GroupElement::identity(basis)),
        template_obs(std::move(tmpl)),
        projectors(std::move(proj)),
        fit_dims(std::move(dims)),
        tikhonov_lambda(lambda),
        pooling(std::move(pool)),
        last_eta(Vector::Zero(basis->dim())) {
    if (lambda < 0) throw ConfigError("level: lambda must be >= 0");
  }
};

struct Message {
  ObservationDelta payload;
  int source_level = 0;
  std::optional<AlgebraVector> algebra_payload;
};

inline Observation predict(const LevelState& level) {
  return act(level.delta, level.template_obs);
}

// Regularized fit of the datum against the level prediction over the level's
// permitted directions; coordinates outside fit_dims stay zero.
inline AlgebraVector fit_residual(const LevelState& level,
                                  const Observation& datum) {
  if (datum.count() != level.template_obs.count() ||
      datum.dim() != level.template_obs.dim())
    throw DimError("fit_residual: datum does not match level resolution");
  return {level.delta.basis(),
          fit_step(level.delta, level.template_obs, datum, level.fit_dims,
                   level.tikhonov_lambda)};
}

// delta <- delta . exp(P eta).  Checks that the updated hypothesis still has
// its logarithm in the realized span; a branch failure propagates so the
// caller can reset the level.
inline void realize_update(LevelState& level, const AlgebraVector& eta) {
  const BasisPtr& basis = level.delta.basis();
  require_same_basis(basis, eta.basis, "realize_update");
  level.last_eta = eta.coeffs;
  const Vector realized = level.projectors.P * eta.coeffs;
  if (realized.norm() == 0.0) return;
  const GroupElement next =
      compose(level.delta, exp_map(AlgebraVector(basis, realized)));
  const AlgebraVector lg = log_map(next);
  level.span_defect = (lg.coeffs - level.projectors.P * lg.coeffs).norm();
  level.delta = next;
}

// r_k = delta^{-1} . datum - template: the part of the datum the level's
// hypothesis does not explain, expressed in the canonical frame.
inline ObservationDelta canonicalize(const LevelState& level,
                                     const Observation& datum) {
  return act(inverse(level.delta), datum) - level.template_obs;
}

inline Message emit_message(const LevelState& level, const ObservationDelta& r,
                            bool algebra_payload_enabled = false) {
  if (!level.pooling)
    throw ConfigError("emit_message: level has no pooling configured");
  Message m{coarse_grain(*level.pooling, r), level.k, std::nullopt};
  if (algebra_payload_enabled) {
    const BasisPtr& basis = level.delta.basis();
    m.algebra_payload = AlgebraVector(
        basis, adjoint(inverse(level.delta)) *
                   (level.projectors.Q * level.last_eta));
  }
  return m;
}

struct StackOptions {
  double mismatch_threshold = 1e-2;
  int mismatch_patience = 10;
  bool algebra_messages = false;
};

struct CycleDiagnostics {
  long cycle = 0;
  Vector eta_norm;
  Vector r_norm;
  Vector realized_norm;
  Vector forwarded_norm;
  double top_residual = 0.0;
  bool mismatch = false;
  int resets = 0;
  int levels_completed = 0;
};

struct PredictiveStack {
  BasisPtr basis;
  std::vector<LevelState> levels;
  StackOptions options;
  int consecutive_high = 0;
  long reset_count = 0;
  long cycles_run = 0;
  bool mismatch = false;

  int depth() const { return static_cast<int>(levels.size()); }
};

// Levels own the flag's coset directions bottom-up; templates are pooled up
// the chain so each level compares at its own resolution.
inline PredictiveStack build_stack(const Flag& flag,
                                   ProjectorSemantics semantics,
                                   const Observation& base_template,
                                   std::vector<PoolingSpec> pooling,
                                   std::vector<double> lambdas = {},
                                   StackOptions options = {}) {
  const int depth = flag.depth();
  if (static_cast<int>(pooling.size()) < depth - 1)
    throw ConfigError("build_stack: need a pooling spec per non-top level");
  if (lambdas.empty()) lambdas.assign(depth, 1e-6);
  if (static_cast<int>(lambdas.size()) != depth)
    throw ConfigError("build_stack: lambda count != level count");

  PredictiveStack stack;
  stack.basis = flag.basis();
  stack.options = options;
  Observation tmpl = base_template;
  for (int k = 1; k <= depth; ++k) {
    const bool has_pool = k - 1 < static_cast<int>(pooling.size());
    stack.levels.emplace_back(
        k, flag.basis(), tmpl, projector(flag, k, semantics),
        flag.subalgebra(k - 1), lambdas[static_cast<std::size_t>(k - 1)],
        has_pool ? std::optional<PoolingSpec>(pooling[static_cast<std::size_t>(
                       k - 1)])
                 : std::nullopt);
    if (k < depth) {
      validate_pooling(pooling[static_cast<std::size_t>(k - 1)], tmpl.count());
      tmpl = pool_points(pooling[static_cast<std::size_t>(k - 1)], tmpl);
    }
  }
  return stack;
}

// One bottom-up pass: each level fits, realizes its own part, canonicalizes,
// and forwards the coarse-grained remainder as the next level's comparator
// datum (interpreted in that level's canonical frame).
inline CycleDiagnostics run_cycle(PredictiveStack& stack,
                                  const Observation& input) {
  const int depth = stack.depth();
  CycleDiagnostics diag;
  diag.cycle = stack.cycles_run;
  diag.eta_norm = Vector::Zero(depth);
  diag.r_norm = Vector::Zero(depth);
  diag.realized_norm = Vector::Zero(depth);
  diag.forwarded_norm = Vector::Zero(depth);

  Observation datum = input;
  for (int k = 1; k <= depth; ++k) {
    LevelState& level = stack.levels[static_cast<std::size_t>(k - 1)];
    const AlgebraVector eta = fit_residual(level, datum);
    const Eigen::Index idx = k - 1;
    diag.eta_norm[idx] = eta.coeffs.norm();
    diag.realized_norm[idx] = (level.projectors.P * eta.coeffs).norm();
    diag.forwarded_norm[idx] = (level.projectors.Q * eta.coeffs).norm();
    try {
      realize_update(level, eta);
    } catch (const LogBranchError&) {
      level.delta = GroupElement::identity(stack.basis);
      level.span_defect = 0.0;
      ++stack.reset_count;
      ++diag.resets;
    }
    const ObservationDelta r = canonicalize(level, datum);
    diag.r_norm[idx] = r.norm();
    diag.levels_completed = k;
    if (k < depth) {
      const Message m =
          emit_message(level, r, stack.options.algebra_messages);
      datum = stack.levels[static_cast<std::size_t>(k)].template_obs +
              m.payload;
    } else {
      diag.top_residual = r.norm();
    }
  }

  if (diag.top_residual > stack.options.mismatch_threshold)
    ++stack.consecutive_high;
  else
    stack.consecutive_high = 0;
  stack.mismatch = stack.consecutive_high >= stack.options.mismatch_patience;
  diag.mismatch = stack.mismatch;
  ++stack.cycles_run;
  return diag;
}

}  // namespace orbit
