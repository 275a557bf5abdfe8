#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "gapkit/types.hpp"

namespace gapkit {

enum class Dtype : std::uint32_t { F32 = 0, F64 = 1 };

enum class Format { Auto, Emb1, Csv };

/// N row-embeddings of dimension d. Values are held in f64 regardless of the
/// on-disk dtype; an f32 set only ever contains float-representable values.
struct EmbeddingSet {
  RowMatrix data;
  Dtype dtype = Dtype::F64;
  std::string modality_tag;

  EmbeddingSet() = default;
  explicit EmbeddingSet(RowMatrix m, Dtype t = Dtype::F64, std::string tag = {})
      : data(std::move(m)), dtype(t), modality_tag(std::move(tag)) {}

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index dims() const { return data.cols(); }
  bool empty() const { return data.rows() == 0; }
};

/// Throws DataError if dims < 1 or any entry is non-finite (naming the row).
void validate(const EmbeddingSet& set);

/// Picks the format from the file's magic bytes (EMB1) or falls back to CSV.
Format detect_format(const std::filesystem::path& path);

/// EMB1 layout (all integers little-endian):
///   "EMB1" | u32 version=1 | u32 dtype (0=f32, 1=f64) | u64 rows | u32 dims | u32 reserved=0
/// followed by rows*dims row-major little-endian values.
inline constexpr std::size_t kEmb1HeaderBytes = 28;

/// Streaming reader. Opening validates the header and, for EMB1, that the
/// file length matches it; batches are validated as they are read.
class EmbeddingReader {
 public:
  explicit EmbeddingReader(const std::filesystem::path& path, Format format = Format::Auto);

  Format format() const { return format_; }
  Dtype dtype() const { return dtype_; }
  Eigen::Index dims() const { return dims_; }
  /// Row count from the header; unknown for CSV.
  std::optional<std::uint64_t> total_rows() const { return total_rows_; }
  std::uint64_t rows_read() const { return rows_read_; }

  /// Next batch of at most max_rows rows, in file order; nullopt at the end.
  std::optional<EmbeddingSet> next_batch(std::size_t max_rows);

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  Format format_;
  Dtype dtype_ = Dtype::F64;
  Eigen::Index dims_ = 0;
  std::optional<std::uint64_t> total_rows_;
  std::uint64_t rows_read_ = 0;
  // CSV: first line is parsed at open to learn dims.
  std::optional<std::string> pending_line_;
  std::uint64_t line_no_ = 0;

  bool next_csv_line(std::string& line);
};

EmbeddingSet read_embeddings(const std::filesystem::path& path, Format format = Format::Auto);

/// Writes atomically. CSV uses 17 significant digits so f64 values survive.
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                      Format format = Format::Emb1);

/// Row subset helper (order preserved).
EmbeddingSet select_rows(const EmbeddingSet& set, const std::vector<Eigen::Index>& rows);

/// Every row scaled to unit norm; throws DegenerateError on a zero row.
EmbeddingSet normalized_rows(const EmbeddingSet& set);

}  // namespace gapkit
