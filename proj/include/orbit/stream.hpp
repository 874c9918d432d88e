#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "orbit/lie.hpp"
#include "orbit/observation.hpp"
#include "orbit/rng.hpp"

namespace orbit {

enum class StreamMode { kStatic, kDrift, kRandomWalk };

// A scene driven through a template: I(t) = gamma(theta(t)) . I0.
struct StreamConfig {
  BasisPtr basis;
  Observation template_obs;
  Vector theta0;
  StreamMode mode = StreamMode::kStatic;

  Vector rate;   // drift: theta(t) = theta0 + rate * t
  Vector sigma;  // random walk: per-coordinate step scale
  std::uint64_t seed = 0;
  double step_dt = 0.01;  // walk step duration; match the consumer's dt

  // Ordered generator index groups; gamma factors as
  // exp(theta|group_L) * ... * exp(theta|group_1).  Empty means one group
  // holding every generator.
  std::vector<std::vector<int>> factor_order;
};

namespace detail {

inline void validate_stream(const StreamConfig& cfg) {
  if (!cfg.basis) throw ConfigError("stream: basis not set");
  const int r = cfg.basis->dim();
  if (cfg.theta0.size() != r) throw DimError("stream: theta0 size != dim");
  if (!cfg.theta0.allFinite())
    throw InvalidAlgebraVector("stream: non-finite theta0");
  if (cfg.template_obs.count() < 1) throw DimError("stream: empty template");
  if (cfg.template_obs.dim() != cfg.basis->ambient_dim())
    throw DimError("stream: template dim != basis ambient dim");
  if (cfg.mode == StreamMode::kDrift && cfg.rate.size() != r)
    throw DimError("stream: drift rate size != dim");
  if (cfg.mode == StreamMode::kRandomWalk) {
    if (cfg.sigma.size() != r) throw DimError("stream: sigma size != dim");
    if ((cfg.sigma.array() < 0).any())
      throw ConfigError("stream: sigma must be nonnegative");
    if (cfg.step_dt <= 0) throw ConfigError("stream: step_dt must be > 0");
  }
  std::vector<bool> used(r, false);
  for (const auto& group : cfg.factor_order) {
    if (group.empty()) throw ConfigError("stream: empty factor group");
    for (int a : group) {
      if (a < 0 || a >= r) throw IndexError("stream: factor index range");
      if (used[a]) throw ConfigError("stream: factor groups overlap");
      used[a] = true;
    }
  }
}

}  // namespace detail

// Ordered-product chart.  Later groups multiply from the left, so group 1
// acts first on the template.
inline GroupElement gamma_of_theta(const StreamConfig& cfg,
                                   const Vector& theta) {
  detail::validate_stream(cfg);
  const int r = cfg.basis->dim();
  if (theta.size() != r) throw DimError("gamma_of_theta: theta size != dim");
  std::vector<std::vector<int>> groups = cfg.factor_order;
  if (groups.empty()) {
    groups.emplace_back();
    for (int a = 0; a < r; ++a) groups.back().push_back(a);
  }
  GroupElement g = GroupElement::identity(cfg.basis);
  for (const auto& group : groups) {
    Vector part = Vector::Zero(r);
    for (int a : group) part[a] = theta[a];
    g = compose(exp_map(AlgebraVector(cfg.basis, part)), g);
  }
  return g;
}

struct StreamSample {
  Vector theta;
  GroupElement gamma;
  Observation obs;
};

// theta(t) per mode; the walk draws are counter-based in (seed, step), so a
// sample at time t never depends on earlier queries.
inline StreamSample sample(const StreamConfig& cfg, double t) {
  detail::validate_stream(cfg);
  if (t < 0) throw DomainError("sample: negative time");
  Vector theta = cfg.theta0;
  switch (cfg.mode) {
    case StreamMode::kStatic:
      break;
    case StreamMode::kDrift:
      theta += cfg.rate * t;
      break;
    case StreamMode::kRandomWalk: {
      const auto steps =
          static_cast<std::uint64_t>(std::floor(t / cfg.step_dt + 1e-9));
      for (std::uint64_t i = 1; i <= steps; ++i) {
        Rng rng(derive_seed(cfg.seed, i));
        for (int a = 0; a < theta.size(); ++a)
          theta[a] += cfg.sigma[a] * rng.normal();
      }
      break;
    }
  }
  GroupElement g = gamma_of_theta(cfg, theta);
  Observation obs = act(g, cfg.template_obs);
  return {std::move(theta), std::move(g), std::move(obs)};
}

}  // namespace orbit
