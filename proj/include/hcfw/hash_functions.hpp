#pragma once

// Per-modality linear hash functions W_m fitted by ridge regression of codes
// on features. The fit only needs the running sums D1 = sum B X^T and
// D2 = sum X X^T, so each round touches just its own chunk.

#include <string>
#include <vector>

#include "hcfw/core.hpp"

namespace hcfw {

struct ModalityStatistics {
  RealMatrix d1;  // r x d, sum of B X^T
  RealMatrix d2;  // d x d, sum of X X^T
  RealMatrix d3;  // d x r, sum of X B^T
  int rounds_absorbed = 0;

  static ModalityStatistics zeros(Index bits, Index dim) {
    return {RealMatrix::Zero(bits, dim), RealMatrix::Zero(dim, dim),
            RealMatrix::Zero(dim, bits), 0};
  }

  Index bits() const { return d1.rows(); }
  Index dim() const { return d2.rows(); }
};

inline ModalityStatistics update_statistics(const ModalityStatistics& stats,
                                            const FeatureMatrix& x_new,
                                            const CodeMatrix& b_new) {
  if (x_new.size() != b_new.size()) {
    throw DimensionError("update_statistics: feature and code column counts differ");
  }
  if (x_new.dim() != stats.dim() || b_new.bits() != stats.bits()) {
    throw DimensionError("update_statistics: chunk is " + std::to_string(x_new.dim()) + "-dim/" +
                         std::to_string(b_new.bits()) + "-bit, statistics are " +
                         std::to_string(stats.dim()) + "-dim/" + std::to_string(stats.bits()) +
                         "-bit");
  }
  if (x_new.size() == 0) return stats;
  ModalityStatistics out = stats;
  out.rounds_absorbed += 1;
  const RealMatrix b = b_new.as_real();
  const RealMatrix bx = b * x_new.values.transpose();
  out.d1 += bx;
  out.d3 += bx.transpose();
  out.d2 += x_new.values * x_new.values.transpose();
  // D2 stays exactly symmetric.
  out.d2 = (0.5 * (out.d2 + out.d2.transpose())).eval();
  return out;
}

namespace detail {

inline Eigen::LLT<RealMatrix> regularized_factor(const RealMatrix& d2, double reg,
                                                 const char* who) {
  if (!(reg >= 0.0)) throw InvalidArgument(std::string(who) + ": regularizer must be >= 0");
  RealMatrix a = d2;
  a.diagonal().array() += reg;
  Eigen::LLT<RealMatrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(who) +
                         ": D2 + reg*I is not positive definite (regularizer " +
                         std::to_string(reg) + ")");
  }
  const double rcond = llt.rcond();
  if (!(rcond > 1e-15)) {
    throw NumericalError(std::string(who) + ": ill-conditioned system, rcond estimate " +
                         std::to_string(rcond));
  }
  return llt;
}

}  // namespace detail

/// W_m = D1 (D2 + theta I)^-1.
inline RealMatrix solve_projection(const ModalityStatistics& stats, double theta) {
  const auto llt = detail::regularized_factor(stats.d2, theta, "solve_projection");
  // (D2 + theta I) is symmetric, so W^T = (D2 + theta I)^-1 D1^T.
  return llt.solve(stats.d1.transpose()).transpose();
}

}  // namespace hcfw
