#pragma once

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "orbit/observation.hpp"

namespace orbit {

// Opt-in invariantization applied after pooling, in the configured order.
enum class InvariantStep { kCenter, kScaleNormalize, kRadialSort };

// Block-mean pooling over a partition of the point indices.  The pooled map
// is linear in the input rows, so it commutes with every linear point map.
struct PoolingSpec {
  std::vector<std::vector<int>> blocks;
  std::vector<InvariantStep> steps;
};

inline void validate_pooling(const PoolingSpec& spec, int n_points) {
  if (spec.blocks.empty()) throw ConfigError("pooling: no blocks");
  std::vector<int> seen;
  for (const auto& block : spec.blocks) {
    if (block.empty()) throw ConfigError("pooling: empty block");
    for (int i : block) {
      if (i < 0 || i >= n_points)
        throw IndexError("pooling: point index out of range");
      seen.push_back(i);
    }
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw ConfigError("pooling: blocks overlap");
  if (static_cast<int>(seen.size()) != n_points)
    throw ConfigError("pooling: blocks do not cover every point");
}

namespace detail {

inline Matrix block_means(const std::vector<std::vector<int>>& blocks,
                          const Matrix& rows) {
  Matrix out(static_cast<Eigen::Index>(blocks.size()), rows.cols());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(rows.cols());
    for (int i : blocks[b]) mean += rows.row(i);
    out.row(static_cast<Eigen::Index>(b)) =
        mean / static_cast<double>(blocks[b].size());
  }
  return out;
}

}  // namespace detail

inline ObservationDelta coarse_grain(const PoolingSpec& spec,
                                     const ObservationDelta& delta) {
  validate_pooling(spec, delta.count());
  Matrix rows = detail::block_means(spec.blocks, delta.rows);
  for (InvariantStep step : spec.steps) {
    switch (step) {
      case InvariantStep::kCenter:
        rows.rowwise() -= rows.colwise().mean();
        break;
      case InvariantStep::kScaleNormalize: {
        const double nrm = rows.norm();
        if (nrm > 1e-300) rows /= nrm;
        break;
      }
      case InvariantStep::kRadialSort: {
        std::vector<Eigen::Index> order(rows.rows());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) {
                           return rows.row(a).norm() < rows.row(b).norm();
                         });
        Matrix sorted(rows.rows(), rows.cols());
        for (Eigen::Index i = 0; i < rows.rows(); ++i)
          sorted.row(i) = rows.row(order[i]);
        rows = std::move(sorted);
        break;
      }
    }
  }
  return ObservationDelta(std::move(rows));
}

// Templates pool by plain block means; invariantization applies to
// differences only.
inline Observation pool_points(const PoolingSpec& spec,
                               const Observation& obs) {
  validate_pooling(spec, obs.count());
  return Observation(detail::block_means(spec.blocks, obs.points));
}

}  // namespace orbit
