#pragma once

// Drives an engine through every round of a scenario plan, scoring the
// cumulative test queries against the accumulated database after each round.

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcfw/engine.hpp"
#include "hcfw/evaluation.hpp"
#include "hcfw/scenarios.hpp"

namespace hcfw {

struct RoundRecord {
  MetricsRecord metrics;
  Index new_categories = 0;
  Index chunk_size = 0;
  double train_ms = 0.0;

  nlohmann::json to_json() const {
    auto j = metrics.to_json();
    j["n_new_categories"] = new_categories;
    j["chunk_size"] = chunk_size;
    j["train_ms"] = train_ms;
    return j;
  }
};

struct PipelineOptions {
  std::vector<Index> precision_ks{100};
  /// Saved after every round when set.
  std::optional<std::filesystem::path> state_dir;
  /// Skip query scoring (timing runs).
  bool evaluate = true;
  std::function<void(const RoundRecord&, const EngineState&)> on_round;
};

/// Queries of `columns`, encoded by `state`.
inline CodeMatrix encode_columns(const EngineState& state, const io::Dataset& ds,
                                 const std::vector<Index>& columns) {
  return encode(state, select_columns(ds.modalities, columns));
}

inline std::vector<RoundRecord> run_plan(const io::Dataset& ds, const ScenarioPlan& plan,
                                         const EngineConfig& config,
                                         const PipelineOptions& opt = {},
                                         EngineState* final_state = nullptr) {
  using clock = std::chrono::steady_clock;
  EngineState state = make_engine(config);
  std::vector<RoundRecord> records;
  for (int t = 1; t <= static_cast<int>(plan.rounds.size()); ++t) {
    const auto t0 = clock::now();
    const FeatureChunk chunk = make_chunk(ds, plan, t, state.high_level.registry);
    RoundSummary summary;
    state = train_round(state, chunk, &summary);
    const auto t1 = clock::now();

    RoundRecord rec;
    rec.new_categories = summary.new_categories;
    rec.chunk_size = summary.chunk_size;
    rec.train_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.metrics.round = t;
    rec.metrics.bits = config.bits;
    rec.metrics.n_database = state.database_size();
    if (opt.evaluate) {
      const auto queries = queries_through(plan, t);
      if (!queries.empty()) {
        const auto q_codes = encode_columns(state, ds, queries);
        const auto q_labels = labels_in_registry_order(ds, queries, state.high_level.registry);
        rec.metrics = evaluate_codes(q_codes, q_labels, state.database_codes,
                                     state.database_labels, opt.precision_ks);
        rec.metrics.round = t;
      }
    }
    rec.metrics.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    if (opt.state_dir) save_state(state, *opt.state_dir);
    if (opt.on_round) opt.on_round(rec, state);
    records.push_back(rec);
  }
  if (final_state) *final_state = std::move(state);
  return records;
}

}  // namespace hcfw
