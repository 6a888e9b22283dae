#pragma once

// Hamming ranking and retrieval metrics. An item is relevant to a query when
// the two share at least one label. Rankings sort by ascending Hamming
// distance with ties broken by ascending database index.

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcfw/core.hpp"

namespace hcfw {

using DistanceMatrix = Eigen::MatrixXi;

/// Entry (q, i) counts differing bits: (r - b_q^T b_i) / 2.
inline DistanceMatrix hamming_distances(const CodeMatrix& queries, const CodeMatrix& database) {
  if (queries.bits() != database.bits()) {
    throw DimensionError("hamming_distances: code lengths differ (" +
                         std::to_string(queries.bits()) + " vs " +
                         std::to_string(database.bits()) + ")");
  }
  const Eigen::MatrixXi q = queries.values.cast<int>();
  const Eigen::MatrixXi d = database.values.cast<int>();
  DistanceMatrix inner = q.transpose() * d;
  return ((-inner).array() + static_cast<int>(queries.bits())) / 2;
}

struct RankingResult {
  std::vector<std::vector<Index>> order;     // per query, database indices
  std::vector<std::vector<int>> distances;   // aligned with `order`
};

/// Counting sort on distance; stable, so equal distances keep index order.
inline RankingResult rank_by_hamming(const CodeMatrix& queries, const CodeMatrix& database) {
  const DistanceMatrix dist = hamming_distances(queries, database);
  const int r = static_cast<int>(queries.bits());
  const Index n = database.size();
  RankingResult out;
  out.order.resize(static_cast<std::size_t>(queries.size()));
  out.distances.resize(static_cast<std::size_t>(queries.size()));
  std::vector<Index> start(static_cast<std::size_t>(r) + 2);
  for (Index q = 0; q < queries.size(); ++q) {
    std::fill(start.begin(), start.end(), 0);
    for (Index i = 0; i < n; ++i) ++start[static_cast<std::size_t>(dist(q, i)) + 1];
    for (std::size_t b = 1; b < start.size(); ++b) start[b] += start[b - 1];
    auto& ord = out.order[static_cast<std::size_t>(q)];
    auto& ds = out.distances[static_cast<std::size_t>(q)];
    ord.resize(static_cast<std::size_t>(n));
    ds.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const auto slot = static_cast<std::size_t>(start[static_cast<std::size_t>(dist(q, i))]++);
      ord[slot] = i;
      ds[slot] = dist(q, i);
    }
  }
  return out;
}

namespace detail {

/// Boolean relevance of every database item to every query, after padding
/// the shorter label matrix with zero category rows.
inline Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> relevance(const LabelMatrix& query_labels,
                                                                     const LabelMatrix& db_labels) {
  const Index rows = std::max(query_labels.categories(), db_labels.categories());
  const Eigen::MatrixXi q = query_labels.padded_to(rows).values.cast<int>();
  const Eigen::MatrixXi d = db_labels.padded_to(rows).values.cast<int>();
  return ((q.transpose() * d).array() > 0).matrix();
}

inline void check_ranking(const RankingResult& ranking, const LabelMatrix& q, const LabelMatrix& d) {
  if (d.size() == 0) throw InvalidArgument("empty database");
  if (static_cast<Index>(ranking.order.size()) != q.size()) {
    throw DimensionError("ranking has " + std::to_string(ranking.order.size()) +
                         " queries, labels have " + std::to_string(q.size()));
  }
  for (const auto& o : ranking.order) {
    if (static_cast<Index>(o.size()) != d.size()) {
      throw DimensionError("ranking length differs from database size");
    }
  }
}

}  // namespace detail

/// Mean over queries with at least one relevant item of
///   AP = (1/R) sum_{k relevant, k <= cutoff} (relevant in top k) / k.
/// Without a cutoff R is the query's total relevant count; with one, R is
/// the relevant count inside the cutoff.
inline double mean_average_precision(const RankingResult& ranking, const LabelMatrix& query_labels,
                                     const LabelMatrix& db_labels,
                                     std::optional<Index> cutoff = std::nullopt) {
  detail::check_ranking(ranking, query_labels, db_labels);
  const Index n = db_labels.size();
  if (cutoff && *cutoff < 1) throw InvalidArgument("MAP cutoff must be >= 1");
  const Index depth = cutoff ? std::min(*cutoff, n) : n;
  const auto rel = detail::relevance(query_labels, db_labels);
  double total = 0.0;
  Index evaluable = 0;
  for (Index q = 0; q < query_labels.size(); ++q) {
    const auto& ord = ranking.order[static_cast<std::size_t>(q)];
    double precision_sum = 0.0;
    Index hits = 0;
    for (Index k = 0; k < depth; ++k) {
      if (rel(q, ord[static_cast<std::size_t>(k)])) {
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(k + 1);
      }
    }
    if (hits == 0) continue;
    total += precision_sum / static_cast<double>(hits);
    ++evaluable;
  }
  if (evaluable == 0) throw InvalidArgument("no evaluable query (no query has a relevant item)");
  return total / static_cast<double>(evaluable);
}

/// Mean over all queries of (relevant in top k) / k.
inline double precision_at_k(const RankingResult& ranking, const LabelMatrix& query_labels,
                             const LabelMatrix& db_labels, Index k) {
  detail::check_ranking(ranking, query_labels, db_labels);
  if (k < 1 || k > db_labels.size()) {
    throw InvalidArgument("precision@k: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(db_labels.size()) + "]");
  }
  if (query_labels.size() == 0) throw InvalidArgument("precision@k: no queries");
  const auto rel = detail::relevance(query_labels, db_labels);
  double total = 0.0;
  for (Index q = 0; q < query_labels.size(); ++q) {
    const auto& ord = ranking.order[static_cast<std::size_t>(q)];
    Index hits = 0;
    for (Index i = 0; i < k; ++i) hits += rel(q, ord[static_cast<std::size_t>(i)]);
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(query_labels.size());
}

struct MetricsRecord {
  int round = 0;
  Index bits = 0;
  double map = 0.0;
  std::vector<std::pair<Index, double>> p_at_k;
  Index n_queries = 0;
  Index n_database = 0;
  double wall_ms = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json pk = nlohmann::json::object();
    for (const auto& [k, v] : p_at_k) pk[std::to_string(k)] = v;
    return {{"round", round},         {"r", bits},
            {"map", map},             {"p_at_k", pk},
            {"n_queries", n_queries}, {"n_database", n_database},
            {"wall_ms", wall_ms}};
  }
};

/// Ranks and scores in one step. Values of `ks` larger than the database are skipped.
inline MetricsRecord evaluate_codes(const CodeMatrix& query_codes, const LabelMatrix& query_labels,
                                    const CodeMatrix& db_codes, const LabelMatrix& db_labels,
                                    const std::vector<Index>& ks = {100},
                                    std::optional<Index> cutoff = std::nullopt) {
  MetricsRecord rec;
  const auto ranking = rank_by_hamming(query_codes, db_codes);
  rec.bits = query_codes.bits();
  rec.map = mean_average_precision(ranking, query_labels, db_labels, cutoff);
  for (Index k : ks) {
    if (k <= db_codes.size()) rec.p_at_k.emplace_back(k, precision_at_k(ranking, query_labels, db_labels, k));
  }
  rec.n_queries = query_codes.size();
  rec.n_database = db_codes.size();
  return rec;
}

}  // namespace hcfw
