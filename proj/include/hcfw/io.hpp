#pragma once

// Binary matrix files and the dataset directory layout.
//
//   FMAT  "FMT1" u32 rows u32 cols, rows*cols f64 (little endian, row-major)
//   LMAT  "LMT1" u32 rows u32 cols, rows*cols u8 in {0,1}
//   IMAT  "IMT1" u32 rows u32 cols, rows*cols i8 in {-1,+1}
//
// Rows are the feature (or category, or bit) dimension and columns are
// instances, matching the in-memory orientation.

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcfw/core.hpp"

namespace hcfw::io {

namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;

namespace detail {

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const Bytes& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

inline void put_f64(Bytes& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline double get_f64(const Bytes& in, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline std::uint32_t checked_dim(Index v, const char* what) {
  if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError(std::string(what) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

struct Header {
  std::uint32_t rows;
  std::uint32_t cols;
};

inline Header read_header(const Bytes& in, std::string_view magic, std::size_t elem_size) {
  if (in.size() < 4 || std::memcmp(in.data(), magic.data(), 4) != 0) {
    throw FormatError("bad magic, expected \"" + std::string(magic) + "\"", 0);
  }
  if (in.size() < 12) throw FormatError("truncated header", in.size());
  Header h{get_u32(in, 4), get_u32(in, 8)};
  const std::uint64_t expected =
      12 + static_cast<std::uint64_t>(h.rows) * h.cols * elem_size;
  if (in.size() < expected) throw FormatError("truncated payload", in.size());
  if (in.size() > expected) throw FormatError("trailing bytes after payload", expected);
  return h;
}

inline void write_header(Bytes& out, std::string_view magic, Index rows, Index cols) {
  out.insert(out.end(), magic.begin(), magic.end());
  put_u32(out, checked_dim(rows, "row count"));
  put_u32(out, checked_dim(cols, "column count"));
}

}  // namespace detail

inline Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const fs::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline std::string read_text(const fs::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

inline void write_text(const fs::path& path, std::string_view text) {
  write_file(path, Bytes(text.begin(), text.end()));
}

// --- FMAT -----------------------------------------------------------------

inline Bytes encode_fmat(const RealMatrix& m) {
  Bytes out;
  out.reserve(12 + static_cast<std::size_t>(m.size()) * 8);
  detail::write_header(out, "FMT1", m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) detail::put_f64(out, m(i, j));
  return out;
}

inline RealMatrix decode_fmat(const Bytes& in) {
  const auto h = detail::read_header(in, "FMT1", 8);
  RealMatrix m(h.rows, h.cols);
  std::size_t at = 12;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j, at += 8) {
      const double v = detail::get_f64(in, at);
      if (!std::isfinite(v)) throw FormatError("non-finite value", at);
      m(i, j) = v;
    }
  }
  return m;
}

inline FeatureMatrix load_feature_matrix(const fs::path& path, int modality_id = 1) {
  return FeatureMatrix{decode_fmat(read_file(path)), modality_id};
}

inline void save_feature_matrix(const fs::path& path, const RealMatrix& m) {
  if (!m.allFinite()) throw InvalidArgument("refusing to save non-finite matrix");
  write_file(path, encode_fmat(m));
}

// --- LMAT -----------------------------------------------------------------

inline Bytes encode_lmat(const LabelData& m) {
  Bytes out;
  detail::write_header(out, "LMT1", m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

inline LabelMatrix decode_lmat(const Bytes& in) {
  const auto h = detail::read_header(in, "LMT1", 1);
  LabelMatrix m;
  m.values.resize(h.rows, h.cols);
  std::size_t at = 12;
  for (Index i = 0; i < m.values.rows(); ++i) {
    for (Index j = 0; j < m.values.cols(); ++j, ++at) {
      if (in[at] > 1) throw FormatError("label entry outside {0,1}", at);
      m.values(i, j) = in[at];
    }
  }
  return m;
}

inline LabelMatrix load_label_matrix(const fs::path& path) {
  return decode_lmat(read_file(path));
}

inline void save_label_matrix(const fs::path& path, const LabelMatrix& m) {
  write_file(path, encode_lmat(m.values));
}

// --- IMAT -----------------------------------------------------------------

inline Bytes encode_imat(const CodeData& m) {
  Bytes out;
  detail::write_header(out, "IMT1", m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out.push_back(static_cast<std::uint8_t>(m(i, j)));
  return out;
}

inline CodeMatrix decode_imat(const Bytes& in) {
  const auto h = detail::read_header(in, "IMT1", 1);
  CodeMatrix m;
  m.values.resize(h.rows, h.cols);
  std::size_t at = 12;
  for (Index i = 0; i < m.values.rows(); ++i) {
    for (Index j = 0; j < m.values.cols(); ++j, ++at) {
      const auto v = static_cast<std::int8_t>(in[at]);
      if (v != 1 && v != -1) throw FormatError("code entry outside {-1,+1}", at);
      m.values(i, j) = v;
    }
  }
  return m;
}

inline CodeMatrix load_code_matrix(const fs::path& path) { return decode_imat(read_file(path)); }

inline void save_code_matrix(const fs::path& path, const CodeMatrix& m) {
  write_file(path, encode_imat(m.values));
}

// --- checksums ------------------------------------------------------------

inline std::string sha256_hex(const std::uint8_t* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string sha256_hex(const Bytes& b) { return sha256_hex(b.data(), b.size()); }

inline std::string sha256_hex(std::string_view s) {
  return sha256_hex(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

// --- categories.json + dataset directory ---------------------------------

inline std::vector<std::string> load_categories(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
  if (!j.is_array()) throw FormatError(path.string() + ": expected a JSON array", 0);
  std::vector<std::string> names;
  for (const auto& v : j) {
    if (!v.is_string()) throw FormatError(path.string() + ": non-string category", 0);
    names.push_back(v.get<std::string>());
  }
  return names;
}

inline void save_categories(const fs::path& path, const std::vector<std::string>& names) {
  write_text(path, nlohmann::json(names).dump(2) + "\n");
}

/// A dataset on disk: `modality_1.fmat` ... `modality_M.fmat`, `labels.lmat`,
/// `categories.json`. Label rows index into `categories`.
struct Dataset {
  std::vector<FeatureMatrix> modalities;
  LabelMatrix labels;
  std::vector<std::string> categories;

  Index size() const { return labels.size(); }
};

inline fs::path modality_file(const fs::path& dir, int m) {
  return dir / ("modality_" + std::to_string(m) + ".fmat");
}

/// Reads modality files 1, 2, ... until the first missing one.
inline std::vector<FeatureMatrix> load_modalities(const fs::path& dir) {
  std::vector<FeatureMatrix> out;
  for (int m = 1; fs::exists(modality_file(dir, m)); ++m) {
    out.push_back(load_feature_matrix(modality_file(dir, m), m));
  }
  if (out.empty()) throw IoError("no modality_1.fmat in " + dir.string());
  return out;
}

inline Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.modalities = load_modalities(dir);
  ds.labels = load_label_matrix(dir / "labels.lmat");
  ds.categories = load_categories(dir / "categories.json");
  if (static_cast<Index>(ds.categories.size()) != ds.labels.categories()) {
    throw ValidationError("categories.json has " + std::to_string(ds.categories.size()) +
                          " names but labels.lmat has " +
                          std::to_string(ds.labels.categories()) + " rows");
  }
  for (const auto& f : ds.modalities) {
    if (f.size() != ds.labels.size()) {
      throw ValidationError("column count mismatch in modality " +
                            std::to_string(f.modality_id));
    }
  }
  return ds;
}

inline void save_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
    save_feature_matrix(modality_file(dir, static_cast<int>(m + 1)), ds.modalities[m].values);
  }
  save_label_matrix(dir / "labels.lmat", ds.labels);
  save_categories(dir / "categories.json", ds.categories);
}

}  // namespace hcfw::io
