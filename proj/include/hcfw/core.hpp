#pragma once

// Data model shared by every stage: feature, label and code matrices, the
// append-only category registry, and per-round chunks.
//
// All matrices are column-per-instance: a FeatureMatrix with d rows and n
// columns holds n instances of dimension d.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hcfw/error.hpp"

namespace hcfw {

using Index = Eigen::Index;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using RealRow = Eigen::RowVectorXd;
using CodeData = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;
using LabelData = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

inline bool all_finite(const RealMatrix& m) { return m.allFinite(); }

struct FeatureMatrix {
  RealMatrix values;
  int modality_id = 1;

  Index dim() const { return values.rows(); }
  Index size() const { return values.cols(); }
};

struct LabelMatrix {
  LabelData values;

  Index categories() const { return values.rows(); }
  Index size() const { return values.cols(); }

  /// Column indices that carry no label at all.
  std::vector<Index> unlabeled_columns() const {
    std::vector<Index> out;
    for (Index j = 0; j < values.cols(); ++j) {
      if ((values.col(j).array() != 0).count() == 0) out.push_back(j);
    }
    return out;
  }

  /// Copy with extra all-zero category rows appended up to `rows`.
  LabelMatrix padded_to(Index rows) const {
    if (rows < values.rows()) throw DimensionError("cannot shrink label matrix");
    LabelMatrix out;
    out.values = LabelData::Zero(rows, values.cols());
    out.values.topRows(values.rows()) = values;
    return out;
  }

  bool operator==(const LabelMatrix& o) const {
    return values.rows() == o.values.rows() && values.cols() == o.values.cols() &&
           values == o.values;
  }
};

/// Binary codes in {-1,+1}; one column per instance (or category).
struct CodeMatrix {
  CodeData values;

  Index bits() const { return values.rows(); }
  Index size() const { return values.cols(); }

  RealMatrix as_real() const { return values.cast<double>(); }

  bool is_binary() const {
    return ((values.array() == 1) || (values.array() == -1)).all();
  }

  bool operator==(const CodeMatrix& o) const {
    return values.rows() == o.values.rows() && values.cols() == o.values.cols() &&
           values == o.values;
  }
};

/// Elementwise sign with sign(0) = +1. Non-finite input is rejected.
template <typename Derived>
CodeMatrix sign_quantize(const Eigen::MatrixBase<Derived>& m) {
  const RealMatrix v = m.template cast<double>();
  if (!v.allFinite()) throw InvalidArgument("sign_quantize: non-finite entry");
  CodeMatrix out;
  out.values = v.unaryExpr([](double x) -> std::int8_t { return x < 0.0 ? -1 : 1; });
  return out;
}

/// Ordered, append-only set of category names.
class CategoryRegistry {
 public:
  Index size() const { return static_cast<Index>(names_.size()); }
  bool empty() const { return names_.empty(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& first_seen_rounds() const { return first_seen_; }

  bool contains(const std::string& name) const { return index_.contains(name); }

  std::optional<Index> index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Appends `names` as categories first seen in `round`. Fails without
  /// modifying the registry when any name is blank, repeated, or known.
  void register_new(const std::vector<std::string>& names, int round) {
    std::unordered_map<std::string, Index> seen;
    for (const auto& n : names) {
      if (n.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw InvalidArgument("blank category name");
      }
      if (index_.contains(n) || !seen.emplace(n, 0).second) {
        throw InvalidArgument("duplicate category name: \"" + n + "\"");
      }
    }
    for (const auto& n : names) {
      index_.emplace(n, size());
      names_.push_back(n);
      first_seen_.push_back(round);
    }
  }

  /// c_o: categories introduced before `round`.
  Index old_count(int round) const {
    Index c = 0;
    for (int r : first_seen_) c += (r < round);
    return c;
  }

  /// c_n: categories introduced at `round`.
  Index new_count(int round) const {
    Index c = 0;
    for (int r : first_seen_) c += (r == round);
    return c;
  }

  bool operator==(const CategoryRegistry& o) const {
    return names_ == o.names_ && first_seen_ == o.first_seen_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<int> first_seen_;
  std::unordered_map<std::string, Index> index_;
};

/// One round's arrival. Label rows follow the registry order with the
/// chunk's `new_categories` appended at the end.
struct FeatureChunk {
  std::vector<FeatureMatrix> modalities;
  LabelMatrix labels;
  std::vector<std::string> new_categories;
  int round = 1;

  Index size() const { return labels.size(); }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }

  std::string summary() const {
    std::string s;
    for (const auto& v : violations) {
      if (!s.empty()) s += "; ";
      s += v;
    }
    return s;
  }
};

/// Structural checks on a chunk against the registry it will be merged into.
inline ValidationReport validate_chunk(const FeatureChunk& chunk,
                                       const CategoryRegistry& registry) {
  ValidationReport report;
  auto& v = report.violations;
  const Index n = chunk.labels.size();
  if (chunk.modalities.empty()) v.emplace_back("chunk has no modalities");
  for (std::size_t m = 0; m < chunk.modalities.size(); ++m) {
    const auto& f = chunk.modalities[m];
    const std::string tag = "modality " + std::to_string(m + 1);
    if (f.size() != n) {
      v.push_back("column count mismatch: " + tag + " has " + std::to_string(f.size()) +
                  " columns, labels have " + std::to_string(n));
    }
    if (f.dim() < 1) v.push_back(tag + " has zero feature rows");
    if (!f.values.allFinite()) v.push_back("non-finite value in " + tag);
  }
  const Index expected_rows =
      registry.size() + static_cast<Index>(chunk.new_categories.size());
  if (chunk.labels.categories() != expected_rows) {
    v.push_back("label rows (" + std::to_string(chunk.labels.categories()) +
                ") do not match registry size after registration (" +
                std::to_string(expected_rows) + ")");
  }
  if (((chunk.labels.values.array() != 0) && (chunk.labels.values.array() != 1)).any()) {
    v.emplace_back("label entry outside {0,1}");
  }
  for (Index j : chunk.labels.unlabeled_columns()) {
    v.push_back("unlabeled instance at column " + std::to_string(j));
  }
  for (const auto& name : chunk.new_categories) {
    if (registry.contains(name)) v.push_back("duplicate category name: \"" + name + "\"");
  }
  return report;
}

}  // namespace hcfw
