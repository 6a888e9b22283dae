#pragma once

// Online protocols over a fixed dataset (IID chunks, category-incremental with
// nested or disjoint category sets) and a synthetic multi-modal generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcfw/core.hpp"
#include "hcfw/io.hpp"
#include "hcfw/random.hpp"

namespace hcfw {

enum class ScenarioKind { iid, overlap, non_overlap };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::iid: return "iid";
    case ScenarioKind::overlap: return "overlap";
    case ScenarioKind::non_overlap: return "non_overlap";
  }
  return "iid";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "iid") return ScenarioKind::iid;
  if (s == "overlap") return ScenarioKind::overlap;
  if (s == "non_overlap" || s == "non-overlap") return ScenarioKind::non_overlap;
  throw InvalidArgument("unknown scenario kind \"" + s + "\" (iid, overlap, non_overlap)");
}

struct PlanRound {
  std::vector<Index> train;
  std::vector<Index> test;
  std::vector<Index> categories;  // dataset category rows usable this round
};

struct ScenarioPlan {
  ScenarioKind kind = ScenarioKind::iid;
  std::vector<PlanRound> rounds;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    auto rs = nlohmann::json::array();
    for (const auto& r : rounds) {
      rs.push_back({{"train", r.train}, {"test", r.test}, {"categories", r.categories}});
    }
    return {{"kind", to_string(kind)}, {"seed", seed}, {"rounds", rs}};
  }

  static ScenarioPlan from_json(const nlohmann::json& j) {
    ScenarioPlan p;
    try {
      p.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
      p.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& r : j.at("rounds")) {
        p.rounds.push_back({r.at("train").get<std::vector<Index>>(),
                            r.at("test").get<std::vector<Index>>(),
                            r.at("categories").get<std::vector<Index>>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("plan: " + std::string(e.what()), 0);
    }
    return p;
  }
};

inline void save_plan(const std::filesystem::path& path, const ScenarioPlan& plan) {
  io::write_text(path, plan.to_json().dump() + "\n");
}

inline ScenarioPlan load_plan(const std::filesystem::path& path) {
  try {
    return ScenarioPlan::from_json(nlohmann::json::parse(io::read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

namespace detail {

inline std::vector<Index> categories_present(const LabelMatrix& labels,
                                             const std::vector<Index>& columns) {
  std::vector<Index> out;
  for (Index c = 0; c < labels.categories(); ++c) {
    for (Index j : columns) {
      if (labels.values(c, j)) {
        out.push_back(c);
        break;
      }
    }
  }
  return out;
}

inline std::vector<Index> as_index(const std::vector<std::size_t>& v) {
  return {v.begin(), v.end()};
}

}  // namespace detail

/// Uniform random disjoint chunks; the test set is attached to round 1 and
/// serves every round. A round's category set is whatever its chunk carries.
inline ScenarioPlan split_iid(const LabelMatrix& labels, const std::vector<Index>& chunk_sizes,
                              Index test_size, std::uint64_t seed) {
  const Index n = labels.size();
  Index total = test_size;
  for (Index s : chunk_sizes) {
    if (s < 1) throw InvalidArgument("chunk sizes must be >= 1");
    total += s;
  }
  if (chunk_sizes.empty()) throw InvalidArgument("at least one chunk required");
  if (test_size < 0 || total > n) {
    throw InvalidArgument("chunk sizes plus test size (" + std::to_string(total) +
                          ") exceed dataset size (" + std::to_string(n) + ")");
  }
  Rng rng(seed);
  const auto perm = detail::as_index(
      rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(total)));
  ScenarioPlan plan;
  plan.kind = ScenarioKind::iid;
  plan.seed = seed;
  auto it = perm.begin();
  std::vector<Index> test(it, it + test_size);
  it += test_size;
  for (Index s : chunk_sizes) {
    PlanRound r;
    r.train.assign(it, it + s);
    it += s;
    r.categories = detail::categories_present(labels, r.train);
    plan.rounds.push_back(std::move(r));
  }
  plan.rounds.front().test = std::move(test);
  return plan;
}

/// Category-incremental plan. Overlap: nested category sets growing by equal
/// increments; an instance joins the earliest round whose set holds one of its
/// labels. Non-overlap: disjoint sets; an instance joins the earliest round
/// whose set intersects its labels and loses labels outside that set when
/// chunks are built. Each round is split train:test by `train_fraction`.
inline ScenarioPlan split_category_incremental(const LabelMatrix& labels, int n_rounds,
                                               bool overlap, double train_fraction,
                                               std::uint64_t seed) {
  const Index c = labels.categories();
  if (n_rounds < 1) throw InvalidArgument("n_rounds must be >= 1");
  if (c < n_rounds) {
    throw InvalidArgument("too few categories (" + std::to_string(c) + ") for " +
                          std::to_string(n_rounds) + " rounds");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must be in (0, 1)");
  }
  Rng rng(seed);
  std::vector<Index> cats(static_cast<std::size_t>(c));
  for (Index i = 0; i < c; ++i) cats[static_cast<std::size_t>(i)] = i;
  rng.shuffle(cats);

  ScenarioPlan plan;
  plan.kind = overlap ? ScenarioKind::overlap : ScenarioKind::non_overlap;
  plan.seed = seed;
  plan.rounds.resize(static_cast<std::size_t>(n_rounds));
  // round_of[category] = first round whose set contains it
  std::vector<int> round_of(static_cast<std::size_t>(c));
  for (int t = 0; t < n_rounds; ++t) {
    const auto lo = static_cast<std::size_t>(c * t / n_rounds);
    const auto hi = static_cast<std::size_t>(c * (t + 1) / n_rounds);
    for (std::size_t i = lo; i < hi; ++i) round_of[static_cast<std::size_t>(cats[i])] = t;
    const std::size_t from = overlap ? 0 : lo;
    auto& set = plan.rounds[static_cast<std::size_t>(t)].categories;
    set.assign(cats.begin() + static_cast<std::ptrdiff_t>(from),
               cats.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(set.begin(), set.end());
  }

  std::vector<std::vector<Index>> members(static_cast<std::size_t>(n_rounds));
  for (Index j = 0; j < labels.size(); ++j) {
    int earliest = n_rounds;
    for (Index k = 0; k < c; ++k) {
      if (labels.values(k, j)) earliest = std::min(earliest, round_of[static_cast<std::size_t>(k)]);
    }
    if (earliest < n_rounds) members[static_cast<std::size_t>(earliest)].push_back(j);
  }
  for (int t = 0; t < n_rounds; ++t) {
    auto& m = members[static_cast<std::size_t>(t)];
    rng.shuffle(m);
    const auto n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(m.size())));
    auto& r = plan.rounds[static_cast<std::size_t>(t)];
    r.train.assign(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_train));
    r.test.assign(m.begin() + static_cast<std::ptrdiff_t>(n_train), m.end());
  }
  return plan;
}

// --- turning plan rounds into engine inputs --------------------------------

inline std::vector<FeatureMatrix> select_columns(const std::vector<FeatureMatrix>& modalities,
                                                 const std::vector<Index>& columns) {
  std::vector<FeatureMatrix> out;
  for (const auto& f : modalities) {
    FeatureMatrix g;
    g.modality_id = f.modality_id;
    g.values.resize(f.dim(), static_cast<Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
      g.values.col(static_cast<Index>(j)) = f.values.col(columns[j]);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Builds round `round` (1-based) of `plan` as a chunk for an engine whose
/// registry is `registry`. Labels outside the round's category set are
/// dropped; instances left without labels are skipped.
inline FeatureChunk make_chunk(const io::Dataset& ds, const ScenarioPlan& plan, int round,
                               const CategoryRegistry& registry) {
  if (round < 1 || round > static_cast<int>(plan.rounds.size())) {
    throw InvalidArgument("plan has no round " + std::to_string(round));
  }
  const auto& pr = plan.rounds[static_cast<std::size_t>(round - 1)];
  std::vector<bool> allowed(static_cast<std::size_t>(ds.labels.categories()), false);
  for (Index c : pr.categories) {
    if (c < 0 || c >= ds.labels.categories()) throw InvalidArgument("plan category out of range");
    allowed[static_cast<std::size_t>(c)] = true;
  }
  std::vector<Index> rows;  // dataset category row per chunk label row
  for (const auto& name : registry.names()) {
    auto it = std::find(ds.categories.begin(), ds.categories.end(), name);
    if (it == ds.categories.end()) {
      throw ValidationError("registered category \"" + name + "\" is not in the dataset");
    }
    rows.push_back(static_cast<Index>(it - ds.categories.begin()));
  }
  FeatureChunk chunk;
  chunk.round = round;
  for (Index c : pr.categories) {
    if (!registry.contains(ds.categories[static_cast<std::size_t>(c)])) {
      chunk.new_categories.push_back(ds.categories[static_cast<std::size_t>(c)]);
      rows.push_back(c);
    }
  }
  std::vector<Index> keep;
  for (Index j : pr.train) {
    if (j < 0 || j >= ds.size()) throw InvalidArgument("plan index out of range");
    bool any = false;
    for (Index row : rows) any = any || (allowed[static_cast<std::size_t>(row)] && ds.labels.values(row, j));
    if (any) keep.push_back(j);
  }
  chunk.modalities = select_columns(ds.modalities, keep);
  chunk.labels.values = LabelData::Zero(static_cast<Index>(rows.size()), static_cast<Index>(keep.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!allowed[static_cast<std::size_t>(rows[r])]) continue;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      chunk.labels.values(static_cast<Index>(r), static_cast<Index>(j)) = ds.labels.values(rows[r], keep[j]);
    }
  }
  return chunk;
}

/// Test indices of rounds 1..round.
inline std::vector<Index> queries_through(const ScenarioPlan& plan, int round) {
  std::vector<Index> out;
  for (int t = 0; t < round && t < static_cast<int>(plan.rounds.size()); ++t) {
    const auto& test = plan.rounds[static_cast<std::size_t>(t)].test;
    out.insert(out.end(), test.begin(), test.end());
  }
  return out;
}

/// Labels of `columns` with rows in registry order; unregistered categories
/// are dropped.
inline LabelMatrix labels_in_registry_order(const io::Dataset& ds, const std::vector<Index>& columns,
                                            const CategoryRegistry& registry) {
  LabelMatrix out;
  out.values = LabelData::Zero(registry.size(), static_cast<Index>(columns.size()));
  for (Index c = 0; c < ds.labels.categories(); ++c) {
    const auto idx = registry.index_of(ds.categories[static_cast<std::size_t>(c)]);
    if (!idx) continue;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      out.values(*idx, static_cast<Index>(j)) = ds.labels.values(c, columns[j]);
    }
  }
  return out;
}

// --- synthetic data --------------------------------------------------------

struct SyntheticConfig {
  Index n_instances = 2000;
  Index n_categories = 12;
  std::vector<Index> dims{64, 32};  // one entry per modality
  /// Probability weights over label counts 1, 2, 3, ...
  std::vector<double> label_cardinality{1.0};
  double noise = 0.1;
  /// One modality per instance, picked uniformly, gets noise * noise_ratio.
  double noise_ratio = 1.0;
  Index latent_dim = 16;
  std::uint64_t seed = 0;
};

inline std::vector<double> parse_cardinality(const std::string& spec) {
  // "1" or "1:0.6,2:0.3,3:0.1"
  std::vector<double> w;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    const auto comma = spec.find(',', pos);
    const std::string item = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto colon = item.find(':');
    try {
      const auto count = static_cast<std::size_t>(std::stoul(item.substr(0, colon)));
      const double weight = colon == std::string::npos ? 1.0 : std::stod(item.substr(colon + 1));
      if (count < 1 || !(weight >= 0.0)) throw InvalidArgument("");
      if (w.size() < count) w.resize(count, 0.0);
      w[count - 1] += weight;
    } catch (const std::exception&) {
      throw InvalidArgument("bad label cardinality item \"" + item + "\"");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  double sum = 0.0;
  for (double x : w) sum += x;
  if (!(sum > 0.0)) throw InvalidArgument("label cardinality weights sum to zero");
  return w;
}

inline std::string synthetic_category_name(Index i) {
  static const char* const kWords[] = {
      "sky",    "tree",   "water", "clouds", "people", "night",  "flower", "car",
      "animal", "sea",    "food",  "indoor", "portrait", "sunset", "river", "lake",
      "dog",    "bird",   "baby",  "female", "male",   "plant",  "structures", "transport"};
  constexpr Index kCount = static_cast<Index>(sizeof(kWords) / sizeof(kWords[0]));
  if (i < kCount) return kWords[i];
  return "category_" + std::to_string(i);
}

/// Each category gets a latent prototype; modality m of an instance is a fixed
/// random linear map of the mean prototype of its categories plus Gaussian noise.
inline io::Dataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_instances < 1 || cfg.n_categories < 1 || cfg.latent_dim < 1) {
    throw InvalidArgument("synthetic sizes must be positive");
  }
  if (cfg.dims.empty()) throw InvalidArgument("at least one modality required");
  for (Index d : cfg.dims)
    if (d < 1) throw InvalidArgument("modality dimensions must be positive");
  if (!(cfg.noise >= 0.0) || !(cfg.noise_ratio > 0.0)) throw InvalidArgument("bad noise settings");
  if (cfg.label_cardinality.empty()) throw InvalidArgument("empty label cardinality");
  if (static_cast<Index>(cfg.label_cardinality.size()) > cfg.n_categories) {
    throw InvalidArgument("label cardinality exceeds category count");
  }
  double weight_sum = 0.0;
  for (double w : cfg.label_cardinality) weight_sum += w;
  if (!(weight_sum > 0.0)) throw InvalidArgument("label cardinality weights sum to zero");

  Rng rng(cfg.seed);
  const Index k = cfg.latent_dim;
  RealMatrix prototypes(k, cfg.n_categories);
  for (Index c = 0; c < cfg.n_categories; ++c)
    for (Index i = 0; i < k; ++i) prototypes(i, c) = rng.normal();
  std::vector<RealMatrix> maps;
  for (Index d : cfg.dims) {
    RealMatrix a(d, k);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < k; ++j) a(i, j) = rng.normal() / std::sqrt(static_cast<double>(k));
    maps.push_back(std::move(a));
  }

  io::Dataset ds;
  const Index n = cfg.n_instances;
  const auto n_mod = cfg.dims.size();
  ds.labels.values = LabelData::Zero(cfg.n_categories, n);
  for (Index c = 0; c < cfg.n_categories; ++c) ds.categories.push_back(synthetic_category_name(c));
  for (std::size_t m = 0; m < n_mod; ++m) {
    ds.modalities.push_back(FeatureMatrix{RealMatrix(cfg.dims[m], n), static_cast<int>(m + 1)});
  }
  for (Index j = 0; j < n; ++j) {
    double u = rng.uniform() * weight_sum;
    std::size_t count = 0;
    while (count + 1 < cfg.label_cardinality.size() && u >= cfg.label_cardinality[count]) {
      u -= cfg.label_cardinality[count];
      ++count;
    }
    const auto cats = rng.sample_without_replacement(static_cast<std::size_t>(cfg.n_categories),
                                                     count + 1);
    RealVector latent = RealVector::Zero(k);
    for (auto c : cats) {
      ds.labels.values(static_cast<Index>(c), j) = 1;
      latent += prototypes.col(static_cast<Index>(c));
    }
    latent /= static_cast<double>(cats.size());
    const auto noisy = n_mod > 1 && cfg.noise_ratio != 1.0
                           ? static_cast<std::size_t>(rng.uniform_index(n_mod))
                           : n_mod;
    for (std::size_t m = 0; m < n_mod; ++m) {
      const double sd = m == noisy ? cfg.noise * cfg.noise_ratio : cfg.noise;
      auto col = ds.modalities[m].values.col(j);
      col = maps[m] * latent;
      for (Index i = 0; i < col.size(); ++i) col(i) += sd * rng.normal();
    }
  }
  return ds;
}

}  // namespace hcfw
