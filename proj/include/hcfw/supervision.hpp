#pragma once

// Per-category supervision vectors: word-vector files, seeded
// pseudo-embeddings, or rows of a Sylvester Hadamard matrix.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcfw/core.hpp"
#include "hcfw/io.hpp"
#include "hcfw/random.hpp"

namespace hcfw {

/// k x c semantic matrix; columns follow registry order.
struct SemanticMatrix {
  RealMatrix values;
  std::string provider_id;

  Index dim() const { return values.rows(); }
  Index size() const { return values.cols(); }
};

inline std::vector<std::string> split_words(const std::string& name) {
  std::istringstream in(name);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

inline bool is_power_of_two(Index k) { return k > 0 && (k & (k - 1)) == 0; }

/// Row `category_index` of the k x k Sylvester Hadamard matrix. Entry (i, j)
/// is (-1)^popcount(i & j).
inline RealVector hadamard_supervision(Index category_index, Index k) {
  if (!is_power_of_two(k)) throw InvalidArgument("Hadamard size must be a power of two");
  if (category_index < 0 || category_index >= k) {
    throw InvalidArgument("Hadamard rows exhausted: category " + std::to_string(category_index) +
                          " needs more than " + std::to_string(k) + " rows");
  }
  RealVector row(k);
  for (Index j = 0; j < k; ++j) {
    row(j) = (std::popcount(static_cast<std::uint64_t>(category_index & j)) & 1) ? -1.0 : 1.0;
  }
  return row;
}

/// Unit-norm Gaussian direction seeded by (name, seed).
inline RealVector pseudo_embedding(const std::string& name, Index k, std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("embedding dimension must be >= 1");
  Rng rng(mix_seed(fnv1a64(name), seed));
  RealVector v(k);
  do {
    for (Index i = 0; i < k; ++i) v(i) = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

class SemanticProvider {
 public:
  virtual ~SemanticProvider() = default;
  virtual std::string id() const = 0;
  virtual Index dim() const = 0;

  /// Embeds `names`, which occupy registry columns starting at `first_column`.
  virtual SemanticMatrix embed(const std::vector<std::string>& names,
                               Index first_column) const = 0;
};

namespace detail {

template <typename WordFn>
SemanticMatrix embed_by_words(const std::vector<std::string>& names, Index k,
                              const std::string& id, WordFn&& word_vector) {
  if (names.empty()) throw InvalidArgument("no category names to embed");
  SemanticMatrix out{RealMatrix::Zero(k, static_cast<Index>(names.size())), id};
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto words = split_words(names[c]);
    if (words.empty()) throw InvalidArgument("blank category name");
    for (const auto& w : words) out.values.col(static_cast<Index>(c)) += word_vector(w);
    out.values.col(static_cast<Index>(c)) /= static_cast<double>(words.size());
  }
  return out;
}

}  // namespace detail

/// Word vectors from a text file, one `word v1 ... vk` entry per line.
class FileVectorProvider final : public SemanticProvider {
 public:
  explicit FileVectorProvider(const std::filesystem::path& path) : path_(path) {
    std::istringstream in(io::read_text(path));
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
      std::istringstream fields(line);
      std::string word;
      if (!(fields >> word)) continue;
      std::vector<double> v;
      for (double x; fields >> x;) v.push_back(x);
      if (!fields.eof()) {
        throw FormatError(path.string() + ": unparsable value on line " + std::to_string(line_no),
                          0);
      }
      if (dim_ == 0) dim_ = static_cast<Index>(v.size());
      if (v.empty() || static_cast<Index>(v.size()) != dim_) {
        throw FormatError(path.string() + ": inconsistent vector length on line " +
                              std::to_string(line_no),
                          0);
      }
      vocab_[word] = Eigen::Map<const RealVector>(v.data(), dim_);
    }
    if (vocab_.empty()) throw FormatError(path.string() + ": no word vectors", 0);
  }

  std::string id() const override { return "file:" + path_.string(); }
  Index dim() const override { return dim_; }

  SemanticMatrix embed(const std::vector<std::string>& names, Index) const override {
    return detail::embed_by_words(names, dim_, id(), [&](const std::string& w) -> const RealVector& {
      auto it = vocab_.find(w);
      if (it == vocab_.end()) throw InvalidArgument("word not in vocabulary: \"" + w + "\"");
      return it->second;
    });
  }

 private:
  std::filesystem::path path_;
  Index dim_ = 0;
  std::unordered_map<std::string, RealVector> vocab_;
};

class PseudoProvider final : public SemanticProvider {
 public:
  PseudoProvider(std::uint64_t seed, Index k) : seed_(seed), k_(k) {
    if (k < 1) throw InvalidArgument("embedding dimension must be >= 1");
  }

  std::string id() const override {
    return "pseudo:" + std::to_string(seed_) + ":" + std::to_string(k_);
  }
  Index dim() const override { return k_; }

  SemanticMatrix embed(const std::vector<std::string>& names, Index) const override {
    return detail::embed_by_words(names, k_, id(), [&](const std::string& w) {
      return pseudo_embedding(w, k_, seed_);
    });
  }

 private:
  std::uint64_t seed_;
  Index k_;
};

/// Category j (in registry order) is supervised by Hadamard row j.
class HadamardProvider final : public SemanticProvider {
 public:
  explicit HadamardProvider(Index k) : k_(k) {
    if (!is_power_of_two(k)) throw InvalidArgument("Hadamard size must be a power of two");
  }

  std::string id() const override { return "hadamard:" + std::to_string(k_); }
  Index dim() const override { return k_; }

  SemanticMatrix embed(const std::vector<std::string>& names, Index first_column) const override {
    if (names.empty()) throw InvalidArgument("no category names to embed");
    SemanticMatrix out{RealMatrix(k_, static_cast<Index>(names.size())), id()};
    for (Index c = 0; c < out.size(); ++c) {
      out.values.col(c) = hadamard_supervision(first_column + c, k_);
    }
    return out;
  }

 private:
  Index k_;
};

inline SemanticMatrix embed_categories(const SemanticProvider& provider,
                                       const std::vector<std::string>& names,
                                       Index first_column = 0) {
  return provider.embed(names, first_column);
}

inline constexpr Index kDefaultEmbeddingDim = 300;

/// Parses `file:<path>`, `pseudo:<seed>[:<k>]`, or `hadamard[:<k>]`. The
/// Hadamard size defaults to the smallest power of two >= max(bits, 64).
inline std::unique_ptr<SemanticProvider> make_provider(const std::string& spec, Index bits) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto parse_index = [&](const std::string& s) -> std::uint64_t {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) {
      throw InvalidArgument("bad number \"" + s + "\" in supervision spec \"" + spec + "\"");
    }
    return v;
  };
  if (kind == "file") {
    if (rest.empty()) throw InvalidArgument("supervision spec file: needs a path");
    return std::make_unique<FileVectorProvider>(rest);
  }
  if (kind == "pseudo") {
    const auto c2 = rest.find(':');
    const std::uint64_t seed = rest.empty() ? 0 : parse_index(rest.substr(0, c2));
    const Index k = c2 == std::string::npos ? kDefaultEmbeddingDim
                                            : static_cast<Index>(parse_index(rest.substr(c2 + 1)));
    return std::make_unique<PseudoProvider>(seed, k);
  }
  if (kind == "hadamard") {
    Index k = 64;
    while (k < bits) k *= 2;
    if (!rest.empty()) k = static_cast<Index>(parse_index(rest));
    return std::make_unique<HadamardProvider>(k);
  }
  throw InvalidArgument("unknown supervision spec \"" + spec +
                        "\" (expected file:<path>, pseudo:<seed>, or hadamard)");
}

}  // namespace hcfw
