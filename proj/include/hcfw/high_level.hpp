#pragma once

// Category-level ("high-level") codes. Each category gets a frozen r-bit code
// learned so that a shared linear map W_c reconstructs the category's
// semantic vector from its code: min |K - W_c^T B_c|^2 over new-category codes
// and W_c, with old-category codes held fixed. Instance codes are the sign of
// the sum of the codes of the categories an instance carries.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hcfw/core.hpp"
#include "hcfw/random.hpp"
#include "hcfw/supervision.hpp"

namespace hcfw {

struct HighLevelState {
  CodeMatrix codes;          // r x c
  SemanticMatrix semantics;  // k x c
  RealMatrix w_c;            // r x k
  CategoryRegistry registry;
  double ridge = 1e-6;

  Index bits() const { return codes.bits(); }
  Index categories() const { return registry.size(); }
};

/// W_c = (B B^T + ridge I)^-1 B K^T over all categories.
inline RealMatrix solve_wc(const CodeMatrix& codes_all, const RealMatrix& semantics_all,
                           double ridge) {
  if (codes_all.size() != semantics_all.cols()) {
    throw DimensionError("solve_wc: code and semantic column counts differ");
  }
  if (codes_all.bits() < 1 || semantics_all.rows() < 1) {
    throw DimensionError("solve_wc: empty code length or embedding dimension");
  }
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be non-negative");
  const RealMatrix b = codes_all.as_real();
  RealMatrix gram = b * b.transpose();
  gram.diagonal().array() += ridge;
  const RealMatrix rhs = b * semantics_all.transpose();
  Eigen::LDLT<RealMatrix> ldlt(gram);
  // A zero pivot is solved as a pseudo-inverse by LDLT, so test pivots directly.
  const auto pivots = ldlt.vectorD().cwiseAbs();
  const double pivot_ratio = pivots.maxCoeff() > 0.0 ? pivots.minCoeff() / pivots.maxCoeff() : 0.0;
  const double rcond = std::min(ldlt.rcond(), pivot_ratio);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(rcond > 1e-14)) {
    throw NumericalError("solve_wc: code Gram matrix is singular (rcond " +
                         std::to_string(rcond) + "); increase ridge");
  }
  return ldlt.solve(rhs);
}

inline RealMatrix solve_wc(const CodeMatrix& codes_all, const SemanticMatrix& semantics_all,
                           double ridge) {
  return solve_wc(codes_all, semantics_all.values, ridge);
}

/// Exact minimizer of the reconstruction loss over row `j` of the new codes,
/// every other row and W_c held fixed:
///   sign(Q_j - B'^T W' W_cj),  Q = W_c K_new.
inline std::vector<std::int8_t> update_bc_row(Index j, const RealMatrix& w_c,
                                              const CodeMatrix& codes_new,
                                              const RealMatrix& semantics_new) {
  const Index r = w_c.rows();
  if (j < 0 || j >= r) throw DimensionError("update_bc_row: row index out of range");
  if (codes_new.bits() != r || semantics_new.rows() != w_c.cols() ||
      codes_new.size() != semantics_new.cols()) {
    throw DimensionError("update_bc_row: inconsistent dimensions");
  }
  const RealRow q_j = w_c.row(j) * semantics_new;  // row j of Q
  // B'^T W' W_cj, computed as (W' W_cj)^T B' without materializing the primed blocks.
  RealVector coupling = w_c * w_c.row(j).transpose();
  coupling(j) = 0.0;
  const RealRow correction = coupling.transpose() * codes_new.as_real();
  const RealRow arg = q_j - correction;
  std::vector<std::int8_t> row(static_cast<std::size_t>(arg.size()));
  for (Index c = 0; c < arg.size(); ++c) row[static_cast<std::size_t>(c)] = arg(c) < 0.0 ? -1 : 1;
  return row;
}

inline std::vector<std::int8_t> update_bc_row(Index j, const RealMatrix& w_c,
                                              const CodeMatrix& codes_new,
                                              const SemanticMatrix& semantics_new) {
  return update_bc_row(j, w_c, codes_new, semantics_new.values);
}

/// |K - W_c^T B|_F^2 + ridge |W_c|_F^2 over the given categories.
inline double objective_value(const CodeMatrix& codes, const RealMatrix& semantics,
                              const RealMatrix& w_c, double ridge) {
  if (codes.size() != semantics.cols() || w_c.rows() != codes.bits() ||
      w_c.cols() != semantics.rows()) {
    throw DimensionError("objective_value: inconsistent dimensions");
  }
  const double fit = (semantics - w_c.transpose() * codes.as_real()).squaredNorm();
  return ridge > 0.0 ? fit + ridge * w_c.squaredNorm() : fit;
}

/// Objective of `state` split into new (trailing) and old (leading) semantic
/// blocks; the columns of `state.codes` must cover both, old first.
inline double objective_value(const HighLevelState& state, const SemanticMatrix& new_semantics,
                              const SemanticMatrix& old_semantics) {
  const Index c_old = old_semantics.size();
  const Index c_new = new_semantics.size();
  if (state.codes.size() != c_old + c_new) {
    throw DimensionError("objective_value: code columns do not match semantics");
  }
  RealMatrix all(state.w_c.cols(), c_old + c_new);
  all << old_semantics.values, new_semantics.values;
  return objective_value(state.codes, all, state.w_c, state.ridge);
}

struct LearnOptions {
  Index bits = 32;
  int iterations = 5;
  std::uint64_t seed = 0;
  int round = 1;
  /// Stop once the relative objective change drops below this; 0 disables.
  double early_stop_tol = 0.0;
};

/// Appends `new_names` to the registry and learns their codes by alternating
/// W_c over all categories and row-wise updates of the new codes only.
/// `objective_trace`, when given, receives the objective after each iteration.
inline HighLevelState learn_new_category_codes(const HighLevelState& state,
                                               const std::vector<std::string>& new_names,
                                               const SemanticMatrix& new_semantics,
                                               const LearnOptions& opt,
                                               std::vector<double>* objective_trace = nullptr) {
  if (new_names.empty()) throw InvalidArgument("no new categories to learn");
  if (opt.iterations < 1) throw InvalidArgument("iterations must be >= 1");
  if (new_semantics.size() != static_cast<Index>(new_names.size())) {
    throw DimensionError("one semantic column per new category required");
  }
  if (!new_semantics.values.allFinite()) throw InvalidArgument("non-finite semantic vector");
  for (Index c = 0; c < new_semantics.size(); ++c) {
    if (new_semantics.values.col(c).isZero(0.0)) {
      throw InvalidArgument("all-zero semantic vector for \"" + new_names[c] + "\"");
    }
  }
  const Index c_old = state.categories();
  const Index r = c_old > 0 ? state.bits() : opt.bits;
  if (r < 1) throw InvalidArgument("code length must be >= 1");
  if (c_old > 0 && state.semantics.dim() != new_semantics.dim()) {
    throw DimensionError("semantic dimension changed between rounds");
  }

  HighLevelState next = state;
  next.registry.register_new(new_names, opt.round);

  const Index c_new = new_semantics.size();
  const Index k = new_semantics.dim();
  RealMatrix semantics_all(k, c_old + c_new);
  if (c_old > 0) semantics_all.leftCols(c_old) = state.semantics.values;
  semantics_all.rightCols(c_new) = new_semantics.values;

  Rng rng(mix_seed(opt.seed, static_cast<std::uint64_t>(opt.round)));
  CodeMatrix codes_new;
  codes_new.values.resize(r, c_new);
  for (Index c = 0; c < c_new; ++c)
    for (Index i = 0; i < r; ++i) codes_new.values(i, c) = rng.coin() ? 1 : -1;

  CodeMatrix codes_all;
  codes_all.values.resize(r, c_old + c_new);
  if (c_old > 0) codes_all.values.leftCols(c_old) = state.codes.values;

  RealMatrix w_c;
  double previous = 0.0;
  for (int it = 0; it < opt.iterations; ++it) {
    codes_all.values.rightCols(c_new) = codes_new.values;
    w_c = solve_wc(codes_all, semantics_all, state.ridge);
    for (Index j = 0; j < r; ++j) {
      const auto row = update_bc_row(j, w_c, codes_new, new_semantics.values);
      for (Index c = 0; c < c_new; ++c) codes_new.values(j, c) = row[static_cast<std::size_t>(c)];
    }
    codes_all.values.rightCols(c_new) = codes_new.values;
    const double obj = objective_value(codes_all, semantics_all, w_c, state.ridge);
    if (objective_trace) objective_trace->push_back(obj);
    if (opt.early_stop_tol > 0.0 && it > 0 &&
        std::abs(previous - obj) <= opt.early_stop_tol * std::max(previous, 1e-300)) {
      break;
    }
    previous = obj;
  }

  next.codes = codes_all;
  next.semantics = SemanticMatrix{std::move(semantics_all), new_semantics.provider_id};
  next.w_c = solve_wc(next.codes, next.semantics, state.ridge);
  return next;
}

/// sign([B_old B_new] L): each instance code is the sign of the summed codes
/// of its categories, sign(0) = +1.
inline CodeMatrix generate_instance_codes(const HighLevelState& state, const LabelMatrix& labels) {
  if (labels.categories() != state.categories()) {
    throw DimensionError("label rows (" + std::to_string(labels.categories()) +
                         ") do not match registry size (" + std::to_string(state.categories()) +
                         ")");
  }
  const auto unlabeled = labels.unlabeled_columns();
  if (!unlabeled.empty()) {
    throw ValidationError("unlabeled instance at column " + std::to_string(unlabeled.front()));
  }
  const Eigen::MatrixXi sums = state.codes.values.cast<int>() * labels.values.cast<int>();
  CodeMatrix out;
  out.values = sums.unaryExpr([](int v) -> std::int8_t { return v < 0 ? -1 : 1; });
  return out;
}

}  // namespace hcfw
