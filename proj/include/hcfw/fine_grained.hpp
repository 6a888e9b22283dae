#pragma once

// Per-instance modality weights for query encoding.
//
// An auxiliary projection U_m regresses the residual B - W_m X of modality m
// onto its features. For a query, h_m = sum |U_m^T x_m| estimates how badly
// modality m would quantize it; weights are z_m = h_max - h_m, where h_max is
// taken over every (modality, query) pair in the batch. Weights, and thus
// codes, depend on the batch the query is encoded with.

#include <algorithm>
#include <vector>

#include "hcfw/core.hpp"
#include "hcfw/hash_functions.hpp"

namespace hcfw {

struct QueryBatch {
  std::vector<FeatureMatrix> modalities;

  Index size() const { return modalities.empty() ? 0 : modalities.front().size(); }
};

struct WeightVectors {
  std::vector<RealRow> z;  // one length-n_q row per modality
  std::vector<RealRow> h;
  double h_max = 0.0;
};

/// U_m = (D2 + delta I)^-1 (D3 - D2 W_m^T).
inline RealMatrix solve_auxiliary(const ModalityStatistics& stats, const RealMatrix& w_m,
                                  double delta) {
  if (w_m.rows() != stats.bits() || w_m.cols() != stats.dim()) {
    throw DimensionError("solve_auxiliary: projection shape does not match statistics");
  }
  const auto llt = detail::regularized_factor(stats.d2, delta, "solve_auxiliary");
  return llt.solve(stats.d3 - stats.d2 * w_m.transpose());
}

namespace detail {

inline void check_batch(const QueryBatch& q, std::size_t modalities, const char* who) {
  if (q.modalities.size() != modalities) {
    throw DimensionError(std::string(who) + ": expected " + std::to_string(modalities) +
                         " modalities, got " + std::to_string(q.modalities.size()));
  }
  for (const auto& f : q.modalities) {
    if (f.size() != q.size()) throw DimensionError(std::string(who) + ": ragged query batch");
  }
}

}  // namespace detail

/// `weight_floor` is added to every weight after the max-minus-error transform.
inline WeightVectors compute_weights(const std::vector<RealMatrix>& auxiliaries,
                                     const QueryBatch& queries, double weight_floor = 0.0) {
  if (auxiliaries.size() < 2) throw InvalidArgument("fine-grained weights need >= 2 modalities");
  if (!(weight_floor >= 0.0)) throw InvalidArgument("weight_floor must be >= 0");
  detail::check_batch(queries, auxiliaries.size(), "compute_weights");
  WeightVectors w;
  w.h.reserve(auxiliaries.size());
  for (std::size_t m = 0; m < auxiliaries.size(); ++m) {
    if (auxiliaries[m].rows() != queries.modalities[m].dim()) {
      throw DimensionError("compute_weights: auxiliary projection for modality " +
                           std::to_string(m + 1) + " has wrong input dimension");
    }
    w.h.push_back((auxiliaries[m].transpose() * queries.modalities[m].values)
                      .cwiseAbs()
                      .colwise()
                      .sum());
  }
  for (const auto& h : w.h) {
    if (h.size() > 0) w.h_max = std::max(w.h_max, h.maxCoeff());
  }
  for (const auto& h : w.h) {
    RealRow z = (-h).array() + w.h_max;
    if (weight_floor > 0.0) z.array() += weight_floor;
    w.z.push_back(std::move(z));
  }
  return w;
}

/// Every weight equal to one: plain sum of per-modality projections.
inline WeightVectors uniform_weights(std::size_t modalities, Index n_q) {
  WeightVectors w;
  w.h_max = 0.0;
  for (std::size_t m = 0; m < modalities; ++m) {
    w.z.push_back(RealRow::Ones(n_q));
    w.h.push_back(RealRow::Zero(n_q));
  }
  return w;
}

/// sign(sum_m (1 z_m) .* (W_m X_qm)): query column j of modality m is scaled
/// by z_m[j] before the modalities are summed.
inline CodeMatrix encode_queries(const std::vector<RealMatrix>& projections,
                                 const WeightVectors& weights, const QueryBatch& queries) {
  if (projections.empty()) throw InvalidArgument("encode_queries: no projections");
  detail::check_batch(queries, projections.size(), "encode_queries");
  if (weights.z.size() != projections.size()) {
    throw DimensionError("encode_queries: one weight vector per modality required");
  }
  const Index r = projections.front().rows();
  RealMatrix fused = RealMatrix::Zero(r, queries.size());
  for (std::size_t m = 0; m < projections.size(); ++m) {
    const auto& w = projections[m];
    if (w.rows() != r || w.cols() != queries.modalities[m].dim()) {
      throw DimensionError("encode_queries: projection for modality " + std::to_string(m + 1) +
                           " has wrong shape");
    }
    if (weights.z[m].size() != queries.size()) {
      throw DimensionError("encode_queries: weight vector length differs from batch size");
    }
    fused.noalias() += (w * queries.modalities[m].values) * weights.z[m].asDiagonal();
  }
  return sign_quantize(fused);
}

}  // namespace hcfw
