#pragma once

// Round-by-round training and the persistent engine state.
//
// A round consumes one chunk: optional kernel lift, high-level codes for any
// new categories, instance codes from labels, sufficient-statistic updates,
// then closed-form W_m and U_m. Raw features of earlier rounds are never
// needed again; everything carried forward lives in EngineState.

#include <algorithm>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcfw/core.hpp"
#include "hcfw/fine_grained.hpp"
#include "hcfw/hash_functions.hpp"
#include "hcfw/high_level.hpp"
#include "hcfw/io.hpp"
#include "hcfw/kernel_map.hpp"
#include "hcfw/supervision.hpp"

namespace hcfw {

inline constexpr int kFormatVersion = 1;

struct EngineConfig {
  Index bits = 32;
  double theta = 1.0;
  double delta = 1.0;
  double ridge = 1e-6;
  int iterations = 5;
  double early_stop_tol = 0.0;
  Index anchor_count = 500;
  std::optional<double> sigma;
  std::vector<int> kernelized_modalities{1};
  std::string supervision = "pseudo:0";
  std::uint64_t seed = 0;
  bool fine_grained = true;
  double weight_floor = 0.0;

  void validate() const {
    if (bits < 8 || bits > 1024) throw InvalidArgument("bits must be in [8, 1024]");
    if (!(theta >= 0.0) || !(delta >= 0.0) || !(ridge >= 0.0)) {
      throw InvalidArgument("theta, delta and ridge must be non-negative");
    }
    if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
    if (anchor_count < 1) throw InvalidArgument("anchor count must be >= 1");
    if (sigma && !(*sigma > 0.0)) throw InvalidArgument("sigma must be positive");
    if (!(weight_floor >= 0.0)) throw InvalidArgument("weight floor must be >= 0");
    for (int m : kernelized_modalities) {
      if (m < 1) throw InvalidArgument("kernelized modality ids start at 1");
    }
  }

  bool kernelizes(int modality_id) const {
    return std::find(kernelized_modalities.begin(), kernelized_modalities.end(), modality_id) !=
           kernelized_modalities.end();
  }
};

struct HashFunctionState {
  std::vector<RealMatrix> projections;  // W_m, r x d_m
  std::vector<RealMatrix> auxiliaries;  // U_m, d_m x r
  std::vector<ModalityStatistics> stats;
  double theta = 1.0;
  double delta = 1.0;

  std::size_t modalities() const { return stats.size(); }
};

struct EngineState {
  EngineConfig config;
  std::vector<KernelMap> kernel_maps;  // one per kernelized modality, fitted at round 1
  HighLevelState high_level;
  HashFunctionState hash_fn;
  CodeMatrix database_codes;
  LabelMatrix database_labels;
  std::vector<Index> raw_dims;  // input dimension per modality, fixed at round 1
  int round = 0;
  int format_version = kFormatVersion;

  Index database_size() const { return database_codes.size(); }

  const KernelMap* kernel_map_for(int modality_id) const {
    for (const auto& k : kernel_maps)
      if (k.source_modality == modality_id) return &k;
    return nullptr;
  }
};

inline EngineState make_engine(const EngineConfig& config) {
  config.validate();
  EngineState s;
  s.config = config;
  s.high_level.ridge = config.ridge;
  s.hash_fn.theta = config.theta;
  s.hash_fn.delta = config.delta;
  s.database_codes.values.resize(config.bits, 0);
  s.database_labels.values.resize(0, 0);
  return s;
}

/// Features as the hash functions see them: kernelized where configured.
inline std::vector<FeatureMatrix> lift_features(const EngineState& state,
                                                const std::vector<FeatureMatrix>& raw) {
  if (raw.size() != state.raw_dims.size()) {
    throw DimensionError("expected " + std::to_string(state.raw_dims.size()) +
                         " modalities, got " + std::to_string(raw.size()));
  }
  std::vector<FeatureMatrix> out;
  out.reserve(raw.size());
  for (std::size_t m = 0; m < raw.size(); ++m) {
    const int id = static_cast<int>(m + 1);
    if (raw[m].dim() != state.raw_dims[m]) {
      throw DimensionError("modality " + std::to_string(id) + " has dimension " +
                           std::to_string(raw[m].dim()) + ", expected " +
                           std::to_string(state.raw_dims[m]));
    }
    if (const auto* km = state.kernel_map_for(id)) {
      out.push_back(apply(*km, raw[m]));
    } else {
      out.push_back(FeatureMatrix{raw[m].values, id});
    }
  }
  return out;
}

struct RoundSummary {
  Index new_categories = 0;
  Index chunk_size = 0;
  std::vector<double> objective_trace;
};

/// Trains one round. The input state is never modified; on any error the
/// caller's state is exactly what it was before the call.
inline EngineState train_round(const EngineState& state, const FeatureChunk& chunk,
                               RoundSummary* summary = nullptr) {
  if (chunk.round != state.round + 1) {
    throw ValidationError("chunk is for round " + std::to_string(chunk.round) +
                          ", engine expects round " + std::to_string(state.round + 1));
  }
  const auto report = validate_chunk(chunk, state.high_level.registry);
  if (!report.ok()) throw ValidationError("invalid chunk: " + report.summary());
  const auto& cfg = state.config;
  if (state.round > 0 && chunk.modalities.size() != state.raw_dims.size()) {
    throw ValidationError("chunk has " + std::to_string(chunk.modalities.size()) +
                          " modalities, engine was trained with " +
                          std::to_string(state.raw_dims.size()));
  }

  EngineState next = state;
  next.round = chunk.round;

  // (1) kernel maps are fitted on the first round only.
  if (state.round == 0) {
    for (const auto& f : chunk.modalities) next.raw_dims.push_back(f.dim());
    for (int id : cfg.kernelized_modalities) {
      if (id > static_cast<int>(chunk.modalities.size())) {
        throw ValidationError("kernelized modality " + std::to_string(id) + " does not exist");
      }
      FeatureMatrix src{chunk.modalities[static_cast<std::size_t>(id - 1)].values, id};
      next.kernel_maps.push_back(
          fit_anchors(src, cfg.anchor_count, cfg.sigma, mix_seed(cfg.seed, 0xA5C0 + id)));
    }
  }

  // (2) lift.
  const auto features = lift_features(next, chunk.modalities);

  // (3) high-level codes for new categories only.
  RoundSummary local;
  local.chunk_size = chunk.size();
  local.new_categories = static_cast<Index>(chunk.new_categories.size());
  if (!chunk.new_categories.empty()) {
    const auto provider = make_provider(cfg.supervision, cfg.bits);
    const auto semantics =
        embed_categories(*provider, chunk.new_categories, next.high_level.categories());
    LearnOptions opt;
    opt.bits = cfg.bits;
    opt.iterations = cfg.iterations;
    opt.seed = cfg.seed;
    opt.round = chunk.round;
    opt.early_stop_tol = cfg.early_stop_tol;
    next.high_level = learn_new_category_codes(next.high_level, chunk.new_categories, semantics,
                                               opt, &local.objective_trace);
  }

  // (4) instance codes.
  const CodeMatrix codes = generate_instance_codes(next.high_level, chunk.labels);

  // (5)-(7) statistics, then W_m and U_m per modality.
  auto& hf = next.hash_fn;
  if (hf.stats.empty()) {
    for (const auto& f : features) hf.stats.push_back(ModalityStatistics::zeros(cfg.bits, f.dim()));
    hf.projections.resize(features.size());
    hf.auxiliaries.resize(features.size());
  }
  for (std::size_t m = 0; m < features.size(); ++m) {
    hf.stats[m] = update_statistics(hf.stats[m], features[m], codes);
    hf.projections[m] = solve_projection(hf.stats[m], hf.theta);
    hf.auxiliaries[m] = solve_auxiliary(hf.stats[m], hf.projections[m], hf.delta);
  }

  // (8) database: old instances get zero rows for categories they never saw.
  const Index c = next.high_level.categories();
  const Index n_old = state.database_size();
  CodeData db_codes(cfg.bits, n_old + chunk.size());
  db_codes.leftCols(n_old) = state.database_codes.values;
  db_codes.rightCols(chunk.size()) = codes.values;
  LabelData db_labels = LabelData::Zero(c, n_old + chunk.size());
  if (n_old > 0) {
    db_labels.topLeftCorner(state.database_labels.categories(), n_old) =
        state.database_labels.values;
  }
  db_labels.rightCols(chunk.size()) = chunk.labels.values;
  next.database_codes.values = std::move(db_codes);
  next.database_labels.values = std::move(db_labels);

  if (summary) *summary = std::move(local);
  return next;
}

/// Hash codes for raw query features using the current hash functions.
inline CodeMatrix encode(const EngineState& state, const std::vector<FeatureMatrix>& raw_queries,
                         WeightVectors* weights_out = nullptr) {
  if (state.round == 0) throw InvalidArgument("engine has not been trained");
  QueryBatch batch{lift_features(state, raw_queries)};
  const auto& hf = state.hash_fn;
  WeightVectors w = state.config.fine_grained && hf.modalities() >= 2
                        ? compute_weights(hf.auxiliaries, batch, state.config.weight_floor)
                        : uniform_weights(hf.modalities(), batch.size());
  auto codes = encode_queries(hf.projections, w, batch);
  if (weights_out) *weights_out = std::move(w);
  return codes;
}

// --- persistence -----------------------------------------------------------

namespace detail {

inline nlohmann::json config_to_json(const EngineConfig& c) {
  nlohmann::json j = {{"bits", c.bits},
                      {"theta", c.theta},
                      {"delta", c.delta},
                      {"ridge", c.ridge},
                      {"iterations", c.iterations},
                      {"early_stop_tol", c.early_stop_tol},
                      {"anchor_count", c.anchor_count},
                      {"kernelized_modalities", c.kernelized_modalities},
                      {"supervision", c.supervision},
                      {"seed", c.seed},
                      {"fine_grained", c.fine_grained},
                      {"weight_floor", c.weight_floor}};
  j["sigma"] = c.sigma ? nlohmann::json(*c.sigma) : nlohmann::json(nullptr);
  return j;
}

inline EngineConfig config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  c.bits = j.at("bits").get<Index>();
  c.theta = j.at("theta").get<double>();
  c.delta = j.at("delta").get<double>();
  c.ridge = j.at("ridge").get<double>();
  c.iterations = j.at("iterations").get<int>();
  c.early_stop_tol = j.at("early_stop_tol").get<double>();
  c.anchor_count = j.at("anchor_count").get<Index>();
  c.kernelized_modalities = j.at("kernelized_modalities").get<std::vector<int>>();
  c.supervision = j.at("supervision").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.fine_grained = j.at("fine_grained").get<bool>();
  c.weight_floor = j.at("weight_floor").get<double>();
  if (!j.at("sigma").is_null()) c.sigma = j.at("sigma").get<double>();
  return c;
}

class BlobWriter {
 public:
  explicit BlobWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::string put(const std::string& name, const io::Bytes& bytes) {
    io::write_file(dir_ / name, bytes);
    index_[name] = {{"sha256", io::sha256_hex(bytes)}, {"bytes", bytes.size()}};
    return name;
  }
  std::string fmat(const std::string& stem, const RealMatrix& m) {
    return put(stem + ".fmat", io::encode_fmat(m));
  }
  std::string imat(const std::string& stem, const CodeData& m) {
    return put(stem + ".imat", io::encode_imat(m));
  }
  std::string lmat(const std::string& stem, const LabelData& m) {
    return put(stem + ".lmat", io::encode_lmat(m));
  }
  const nlohmann::json& index() const { return index_; }

 private:
  std::filesystem::path dir_;
  nlohmann::json index_ = nlohmann::json::object();
};

class BlobReader {
 public:
  BlobReader(std::filesystem::path dir, nlohmann::json index)
      : dir_(std::move(dir)), index_(std::move(index)) {}

  io::Bytes get(const std::string& name) const {
    if (!index_.contains(name)) throw FormatError("blob \"" + name + "\" missing from manifest", 0);
    const auto& entry = index_.at(name);
    const auto bytes = io::read_file(dir_ / name);
    if (bytes.size() != entry.at("bytes").get<std::size_t>()) {
      throw FormatError("blob \"" + name + "\" length mismatch: manifest says " +
                            std::to_string(entry.at("bytes").get<std::size_t>()) + ", file has " +
                            std::to_string(bytes.size()),
                        bytes.size());
    }
    if (io::sha256_hex(bytes) != entry.at("sha256").get<std::string>()) {
      throw FormatError("blob \"" + name + "\" checksum mismatch", 0);
    }
    return bytes;
  }
  RealMatrix fmat(const std::string& name) const { return io::decode_fmat(get(name)); }
  CodeMatrix imat(const std::string& name) const { return io::decode_imat(get(name)); }
  LabelMatrix lmat(const std::string& name) const { return io::decode_lmat(get(name)); }

 private:
  std::filesystem::path dir_;
  nlohmann::json index_;
};

inline void check_state_invariants(const EngineState& s) {
  const auto fail = [](const std::string& what) { throw ValidationError("state invariant: " + what); };
  const auto& hl = s.high_level;
  const Index c = hl.categories();
  if (s.round < 0) fail("negative round");
  if (hl.codes.size() != c || hl.semantics.size() != c) fail("category count mismatch");
  if (!hl.codes.is_binary()) fail("high-level codes not in {-1,+1}");
  if (c > 0 && hl.codes.bits() != s.config.bits) fail("high-level code length differs from config");
  if (s.database_codes.size() != s.database_labels.size()) fail("database codes/labels size");
  if (s.database_size() > 0 && s.database_labels.categories() != c) fail("database label rows");
  if (!s.database_codes.is_binary()) fail("database codes not in {-1,+1}");
  const auto& hf = s.hash_fn;
  if (hf.projections.size() != hf.stats.size() || hf.auxiliaries.size() != hf.stats.size()) {
    fail("hash function lists differ in length");
  }
  if (s.round > 0 && hf.stats.size() != s.raw_dims.size()) fail("modality count");
  for (std::size_t m = 0; m < hf.stats.size(); ++m) {
    const auto& st = hf.stats[m];
    if (st.d1.rows() != s.config.bits || st.d3.cols() != s.config.bits) fail("statistics bits");
    if (st.d3 != st.d1.transpose()) fail("D3 != D1^T");
    if (st.d2 != st.d2.transpose()) fail("D2 not symmetric");
    if (hf.projections[m].rows() != s.config.bits || hf.projections[m].cols() != st.dim()) {
      fail("projection shape");
    }
    if (hf.auxiliaries[m].rows() != st.dim() || hf.auxiliaries[m].cols() != s.config.bits) {
      fail("auxiliary shape");
    }
  }
  for (const auto& k : s.kernel_maps) {
    if (!(k.sigma > 0.0) || k.anchor_count() < 1) fail("kernel map");
  }
}

}  // namespace detail

/// Writes `manifest.json` plus one checksummed blob per matrix into `dir`.
inline void save_state(const EngineState& s, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  detail::BlobWriter blobs(dir);
  nlohmann::json j;
  j["format_version"] = s.format_version;
  j["round"] = s.round;
  j["config"] = detail::config_to_json(s.config);
  j["raw_dims"] = s.raw_dims;
  j["registry"] = {{"names", s.high_level.registry.names()},
                   {"first_seen_round", s.high_level.registry.first_seen_rounds()}};

  auto kernels = nlohmann::json::array();
  for (const auto& k : s.kernel_maps) {
    const std::string stem = "kernel_anchors_" + std::to_string(k.source_modality);
    kernels.push_back({{"source_modality", k.source_modality},
                       {"sigma", k.sigma},
                       {"seed", k.seed},
                       {"anchors", blobs.fmat(stem, k.anchors)}});
  }
  j["kernel_maps"] = kernels;

  const auto& hl = s.high_level;
  j["high_level"] = {{"ridge", hl.ridge},
                     {"provider_id", hl.semantics.provider_id},
                     {"codes", blobs.imat("high_level_codes", hl.codes.values)},
                     {"semantics", blobs.fmat("semantics", hl.semantics.values)},
                     {"w_c", blobs.fmat("w_c", hl.w_c)}};

  auto mods = nlohmann::json::array();
  for (std::size_t m = 0; m < s.hash_fn.stats.size(); ++m) {
    const std::string sfx = "_" + std::to_string(m + 1);
    const auto& st = s.hash_fn.stats[m];
    mods.push_back({{"rounds_absorbed", st.rounds_absorbed},
                    {"projection", blobs.fmat("projection" + sfx, s.hash_fn.projections[m])},
                    {"auxiliary", blobs.fmat("auxiliary" + sfx, s.hash_fn.auxiliaries[m])},
                    {"d1", blobs.fmat("d1" + sfx, st.d1)},
                    {"d2", blobs.fmat("d2" + sfx, st.d2)},
                    {"d3", blobs.fmat("d3" + sfx, st.d3)}});
  }
  j["hash_functions"] = {{"theta", s.hash_fn.theta}, {"delta", s.hash_fn.delta}, {"modalities", mods}};
  j["database"] = {{"codes", blobs.imat("database_codes", s.database_codes.values)},
                   {"labels", blobs.lmat("database_labels", s.database_labels.values)}};
  j["blobs"] = blobs.index();
  io::write_text(dir / "manifest.json", j.dump(2) + "\n");
}

inline EngineState load_state(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest.json: " + std::string(e.what()), e.byte);
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw FormatError("unsupported version " + std::to_string(version) + " (expected " +
                            std::to_string(kFormatVersion) + ")",
                        0);
    }
    detail::BlobReader blobs(dir, j.at("blobs"));
    EngineState s;
    s.format_version = version;
    s.round = j.at("round").get<int>();
    s.config = detail::config_from_json(j.at("config"));
    s.config.validate();
    s.raw_dims = j.at("raw_dims").get<std::vector<Index>>();
    s.high_level.registry = CategoryRegistry{};
    const auto names = j.at("registry").at("names").get<std::vector<std::string>>();
    const auto rounds = j.at("registry").at("first_seen_round").get<std::vector<int>>();
    if (names.size() != rounds.size()) throw ValidationError("registry arrays differ in length");
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i > 0 && rounds[i] < rounds[i - 1]) throw ValidationError("registry rounds not ordered");
      s.high_level.registry.register_new({names[i]}, rounds[i]);
    }
    for (const auto& k : j.at("kernel_maps")) {
      KernelMap km;
      km.source_modality = k.at("source_modality").get<int>();
      km.sigma = k.at("sigma").get<double>();
      km.seed = k.at("seed").get<std::uint64_t>();
      km.anchors = blobs.fmat(k.at("anchors").get<std::string>());
      s.kernel_maps.push_back(std::move(km));
    }
    const auto& hl = j.at("high_level");
    s.high_level.ridge = hl.at("ridge").get<double>();
    s.high_level.codes = blobs.imat(hl.at("codes").get<std::string>());
    s.high_level.semantics = SemanticMatrix{blobs.fmat(hl.at("semantics").get<std::string>()),
                                            hl.at("provider_id").get<std::string>()};
    s.high_level.w_c = blobs.fmat(hl.at("w_c").get<std::string>());
    const auto& hf = j.at("hash_functions");
    s.hash_fn.theta = hf.at("theta").get<double>();
    s.hash_fn.delta = hf.at("delta").get<double>();
    for (const auto& m : hf.at("modalities")) {
      ModalityStatistics st;
      st.rounds_absorbed = m.at("rounds_absorbed").get<int>();
      st.d1 = blobs.fmat(m.at("d1").get<std::string>());
      st.d2 = blobs.fmat(m.at("d2").get<std::string>());
      st.d3 = blobs.fmat(m.at("d3").get<std::string>());
      s.hash_fn.stats.push_back(std::move(st));
      s.hash_fn.projections.push_back(blobs.fmat(m.at("projection").get<std::string>()));
      s.hash_fn.auxiliaries.push_back(blobs.fmat(m.at("auxiliary").get<std::string>()));
    }
    s.database_codes = blobs.imat(j.at("database").at("codes").get<std::string>());
    s.database_labels = blobs.lmat(j.at("database").at("labels").get<std::string>());
    detail::check_state_invariants(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()), 0);
  }
}

}  // namespace hcfw
