#pragma once

// Shared fixtures and reference solvers for the test suites. The reference
// solvers deliberately take different numerical routes from the library
// (QR on stacked systems, exhaustive enumeration, naive loops).

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcfw.hpp"

namespace hcfw::testing {

inline RealMatrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  RealMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

inline CodeMatrix random_codes(Index bits, Index cols, Rng& rng) {
  CodeMatrix c;
  c.values.resize(bits, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < bits; ++i) c.values(i, j) = rng.coin() ? 1 : -1;
  return c;
}

/// Random multi-label matrix with every column carrying at least one label.
inline LabelMatrix random_labels(Index categories, Index cols, Rng& rng, double density = 0.3) {
  LabelMatrix l;
  l.values = LabelData::Zero(categories, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index c = 0; c < categories; ++c) l.values(c, j) = rng.uniform() < density ? 1 : 0;
    if ((l.values.col(j).array() != 0).count() == 0) {
      l.values(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(categories))), j) = 1;
    }
  }
  return l;
}

/// argmin_W |Y - W X|_F^2 + reg |W|_F^2 by QR on the stacked system
/// [X^T; sqrt(reg) I] W^T = [Y^T; 0]. X is d x n, Y is r x n.
inline RealMatrix ridge_by_qr(const RealMatrix& x, const RealMatrix& y, double reg) {
  const Index d = x.rows();
  const Index n = x.cols();
  RealMatrix a(n + d, d);
  a.topRows(n) = x.transpose();
  a.bottomRows(d) = std::sqrt(reg) * RealMatrix::Identity(d, d);
  RealMatrix b = RealMatrix::Zero(n + d, y.rows());
  b.topRows(n) = y.transpose();
  return a.colPivHouseholderQr().solve(b).transpose();
}

inline double relative_error(const RealMatrix& got, const RealMatrix& want) {
  const double denom = std::max(want.norm(), 1e-300);
  return (got - want).norm() / denom;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hcfw_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Naive AP/MAP: explicit relevance test per pair, ranking by a full sort on
/// (distance, index) pairs.
inline double naive_map(const CodeMatrix& q, const LabelMatrix& ql, const CodeMatrix& db,
                        const LabelMatrix& dl) {
  double sum = 0.0;
  int counted = 0;
  for (Index i = 0; i < q.size(); ++i) {
    std::vector<std::pair<int, Index>> items;
    for (Index j = 0; j < db.size(); ++j) {
      int d = 0;
      for (Index b = 0; b < q.bits(); ++b) d += q.values(b, i) != db.values(b, j);
      items.emplace_back(d, j);
    }
    std::sort(items.begin(), items.end());
    int hits = 0;
    double ap = 0.0;
    for (std::size_t k = 0; k < items.size(); ++k) {
      bool rel = false;
      const Index rows = std::min(ql.categories(), dl.categories());
      for (Index c = 0; c < rows; ++c) rel = rel || (ql.values(c, i) && dl.values(c, items[k].second));
      if (rel) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
      }
    }
    if (hits > 0) {
      sum += ap / hits;
      ++counted;
    }
  }
  return counted ? sum / counted : -1.0;
}

}  // namespace hcfw::testing
