#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "hcfw/core.hpp"
#include "hcfw/random.hpp"

namespace hcfw {

/// RBF lift onto a fixed set of anchors: phi(x)_i = exp(-|x - a_i|^2 / (2 sigma^2)).
struct KernelMap {
  RealMatrix anchors;  // d x m, one anchor per column
  double sigma = 1.0;
  int source_modality = 1;
  std::uint64_t seed = 0;

  Index anchor_count() const { return anchors.cols(); }
  Index input_dim() const { return anchors.rows(); }
};

namespace detail {

/// Squared Euclidean distances between columns of `a` (rows) and `x` (cols).
/// Differences are formed explicitly so that x == a gives exactly zero.
inline RealMatrix squared_distances(const RealMatrix& a, const RealMatrix& x) {
  RealMatrix d2(a.cols(), x.cols());
  for (Index i = 0; i < a.cols(); ++i) {
    d2.row(i) = (x.colwise() - a.col(i)).colwise().squaredNorm();
  }
  return d2;
}

}  // namespace detail

/// Samples `anchor_count` distinct training columns as anchors. When `sigma`
/// is not given it is set to the mean anchor-to-sample distance over up to
/// 1000 training columns drawn with a seed derived from `seed`.
inline KernelMap fit_anchors(const FeatureMatrix& features, Index anchor_count,
                             std::optional<double> sigma, std::uint64_t seed) {
  const Index n = features.size();
  if (anchor_count < 1) throw InvalidArgument("anchor_count must be >= 1");
  if (anchor_count > n) {
    throw InvalidArgument("anchor_count (" + std::to_string(anchor_count) +
                          ") exceeds available columns (" + std::to_string(n) + ")");
  }
  if (sigma && !(*sigma > 0.0 && std::isfinite(*sigma))) {
    throw InvalidArgument("sigma must be a positive finite number");
  }
  if (!features.values.allFinite()) throw InvalidArgument("non-finite training feature");

  KernelMap map;
  map.seed = seed;
  map.source_modality = features.modality_id;
  map.anchors.resize(features.dim(), anchor_count);
  Rng rng(seed);
  const auto picked = rng.sample_without_replacement(static_cast<std::size_t>(n),
                                                     static_cast<std::size_t>(anchor_count));
  for (Index i = 0; i < anchor_count; ++i) {
    map.anchors.col(i) = features.values.col(static_cast<Index>(picked[i]));
  }

  if (sigma) {
    map.sigma = *sigma;
    return map;
  }
  if (n < 2) throw InvalidArgument("sigma estimation needs at least 2 training columns");
  Rng sample_rng(mix_seed(seed, 0x5167));
  const Index sample_count = std::min<Index>(n, 1000);
  const auto sample_idx = sample_rng.sample_without_replacement(
      static_cast<std::size_t>(n), static_cast<std::size_t>(sample_count));
  RealMatrix sample(features.dim(), sample_count);
  for (Index j = 0; j < sample_count; ++j) {
    sample.col(j) = features.values.col(static_cast<Index>(sample_idx[j]));
  }
  const double mean = detail::squared_distances(map.anchors, sample).cwiseSqrt().mean();
  if (!(mean > 0.0)) throw NumericalError("kernel width estimate is zero (all points identical)");
  map.sigma = mean;
  return map;
}

/// Output has one row per anchor and one column per input column; entries lie in (0, 1].
inline FeatureMatrix apply(const KernelMap& map, const FeatureMatrix& features) {
  if (features.dim() != map.input_dim()) {
    throw DimensionError("kernel map expects " + std::to_string(map.input_dim()) +
                         "-dimensional input, got " + std::to_string(features.dim()));
  }
  const double scale = -1.0 / (2.0 * map.sigma * map.sigma);
  FeatureMatrix out;
  out.modality_id = features.modality_id;
  out.values = (detail::squared_distances(map.anchors, features.values) * scale).array().exp();
  return out;
}

}  // namespace hcfw
