#include "gapkit/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

#include "gapkit/error.hpp"
#include "gapkit/util.hpp"

namespace gapkit {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
T from_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof v);
  }
  return v;
}

template <class T>
void to_le(T v, unsigned char* p) {
  std::memcpy(p, &v, sizeof v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(p, p + sizeof v);
}

std::size_t dtype_size(Dtype t) { return t == Dtype::F32 ? 4 : 8; }

void check_row_finite(const double* row, Eigen::Index dims, std::uint64_t row_index) {
  for (Eigen::Index j = 0; j < dims; ++j) {
    if (!std::isfinite(row[j])) {
      throw DataError("non-finite value at row " + std::to_string(row_index) + ", column " +
                      std::to_string(j));
    }
  }
}

}  // namespace

void validate(const EmbeddingSet& set) {
  if (set.dims() < 1) throw DataError("embedding set has no dimensions");
  for (Eigen::Index i = 0; i < set.rows(); ++i)
    check_row_finite(set.data.row(i).data(), set.dims(), static_cast<std::uint64_t>(i));
}

Format detect_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0) return Format::Emb1;
  return Format::Csv;
}

EmbeddingReader::EmbeddingReader(const std::filesystem::path& path, Format format)
    : path_(path), format_(format == Format::Auto ? detect_format(path) : format) {
  in_.open(path, std::ios::binary);
  if (!in_) throw DataError("cannot open " + path.string());

  if (format_ == Format::Emb1) {
    unsigned char header[kEmb1HeaderBytes];
    in_.read(reinterpret_cast<char*>(header), kEmb1HeaderBytes);
    if (in_.gcount() != static_cast<std::streamsize>(kEmb1HeaderBytes))
      throw DataError(path.string() + ": malformed header (file shorter than 28 bytes)");
    if (std::memcmp(header, kMagic, 4) != 0) throw DataError(path.string() + ": malformed header (bad magic)");
    const auto version = from_le<std::uint32_t>(header + 4);
    const auto dtype = from_le<std::uint32_t>(header + 8);
    const auto rows = from_le<std::uint64_t>(header + 12);
    const auto dims = from_le<std::uint32_t>(header + 20);
    const auto reserved = from_le<std::uint32_t>(header + 24);
    if (version != kVersion)
      throw VersionError(path.string() + ": unsupported format version " + std::to_string(version));
    if (dtype > 1) throw DataError(path.string() + ": malformed header (dtype code " + std::to_string(dtype) + ")");
    if (dims == 0) throw DataError(path.string() + ": malformed header (dims = 0)");
    if (reserved != 0) throw DataError(path.string() + ": malformed header (reserved field not zero)");
    dtype_ = static_cast<Dtype>(dtype);
    dims_ = dims;
    total_rows_ = rows;

    const auto expected = kEmb1HeaderBytes + rows * dims * dtype_size(dtype_);
    const auto actual = std::filesystem::file_size(path);
    if (actual < expected)
      throw DataError(path.string() + ": truncated payload (" + std::to_string(actual) + " bytes, header implies " +
                      std::to_string(expected) + ")");
    if (actual > expected)
      throw DataError(path.string() + ": trailing bytes after payload (" + std::to_string(actual) +
                      " bytes, header implies " + std::to_string(expected) + ")");
    return;
  }

  // CSV: learn dims from the first non-empty line.
  std::string line;
  if (!next_csv_line(line)) throw DataError(path.string() + ": empty CSV, cannot infer dimensions");
  dims_ = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  pending_line_ = std::move(line);
}

bool EmbeddingReader::next_csv_line(std::string& line) {
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return true;
  }
  return false;
}

std::optional<EmbeddingSet> EmbeddingReader::next_batch(std::size_t max_rows) {
  if (max_rows == 0) max_rows = 1;

  if (format_ == Format::Emb1) {
    const std::uint64_t remaining = *total_rows_ - rows_read_;
    if (remaining == 0) return std::nullopt;
    const auto n = static_cast<Eigen::Index>(std::min<std::uint64_t>(remaining, max_rows));
    EmbeddingSet batch(RowMatrix(n, dims_), dtype_);
    const std::size_t elem = dtype_size(dtype_);
    std::vector<unsigned char> buf(static_cast<std::size_t>(n * dims_) * elem);
    in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in_.gcount() != static_cast<std::streamsize>(buf.size()))
      throw DataError(path_.string() + ": truncated payload at row " + std::to_string(rows_read_));
    double* out = batch.data.data();
    for (std::size_t k = 0; k < static_cast<std::size_t>(n * dims_); ++k) {
      out[k] = dtype_ == Dtype::F32 ? static_cast<double>(from_le<float>(buf.data() + 4 * k))
                                    : from_le<double>(buf.data() + 8 * k);
    }
    for (Eigen::Index i = 0; i < n; ++i) check_row_finite(batch.data.row(i).data(), dims_, rows_read_ + i);
    rows_read_ += static_cast<std::uint64_t>(n);
    return batch;
  }

  std::vector<double> values;
  values.reserve(max_rows * static_cast<std::size_t>(dims_));
  std::size_t got = 0;
  std::string line;
  while (got < max_rows) {
    if (pending_line_) {
      line = std::move(*pending_line_);
      pending_line_.reset();
    } else if (!next_csv_line(line)) {
      break;
    }
    const std::uint64_t row = rows_read_ + got;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    Eigen::Index cols = 0;
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw DataError(path_.string() + ": cannot parse value at row " + std::to_string(row) + ", column " +
                        std::to_string(cols));
      }
      if (!std::isfinite(v)) {
        throw DataError("non-finite value at row " + std::to_string(row) + ", column " + std::to_string(cols));
      }
      values.push_back(v);
      ++cols;
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') {
        throw DataError(path_.string() + ": unexpected character at row " + std::to_string(row));
      }
      ++p;
    }
    if (cols != dims_) {
      throw DataError(path_.string() + ": row " + std::to_string(row) + " has " + std::to_string(cols) +
                      " columns, expected " + std::to_string(dims_));
    }
    ++got;
  }
  if (got == 0) return std::nullopt;
  EmbeddingSet batch(Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(got), dims_), Dtype::F64);
  rows_read_ += got;
  return batch;
}

EmbeddingSet read_embeddings(const std::filesystem::path& path, Format format) {
  EmbeddingReader reader(path, format);
  if (reader.total_rows()) {
    EmbeddingSet set(RowMatrix(0, reader.dims()), reader.dtype());
    if (*reader.total_rows() > 0) {
      set = *reader.next_batch(static_cast<std::size_t>(*reader.total_rows()));
    }
    return set;
  }
  std::vector<RowMatrix> parts;
  Eigen::Index total = 0;
  while (auto batch = reader.next_batch(1 << 14)) {
    total += batch->rows();
    parts.push_back(std::move(batch->data));
  }
  RowMatrix all(total, reader.dims());
  Eigen::Index at = 0;
  for (const auto& part : parts) {
    all.middleRows(at, part.rows()) = part;
    at += part.rows();
  }
  return EmbeddingSet(std::move(all), Dtype::F64);
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path, Format format) {
  validate(set);
  if (format == Format::Auto) format = path.extension() == ".csv" ? Format::Csv : Format::Emb1;

  if (format == Format::Csv) {
    write_atomic(path, [&](std::ostream& out) {
      for (Eigen::Index i = 0; i < set.rows(); ++i) {
        for (Eigen::Index j = 0; j < set.dims(); ++j) {
          if (j) out << ',';
          out << format_double(set.data(i, j));
        }
        out << '\n';
      }
    });
    return;
  }

  write_atomic(path, [&](std::ostream& out) {
    unsigned char header[kEmb1HeaderBytes];
    std::memcpy(header, kMagic, 4);
    to_le<std::uint32_t>(kVersion, header + 4);
    to_le<std::uint32_t>(static_cast<std::uint32_t>(set.dtype), header + 8);
    to_le<std::uint64_t>(static_cast<std::uint64_t>(set.rows()), header + 12);
    to_le<std::uint32_t>(static_cast<std::uint32_t>(set.dims()), header + 20);
    to_le<std::uint32_t>(0, header + 24);
    out.write(reinterpret_cast<const char*>(header), kEmb1HeaderBytes);

    const std::size_t elem = dtype_size(set.dtype);
    std::vector<unsigned char> row(static_cast<std::size_t>(set.dims()) * elem);
    for (Eigen::Index i = 0; i < set.rows(); ++i) {
      for (Eigen::Index j = 0; j < set.dims(); ++j) {
        if (set.dtype == Dtype::F32)
          to_le<float>(static_cast<float>(set.data(i, j)), row.data() + 4 * j);
        else
          to_le<double>(set.data(i, j), row.data() + 8 * j);
      }
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
  });
}

EmbeddingSet select_rows(const EmbeddingSet& set, const std::vector<Eigen::Index>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), set.dims());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = set.data.row(rows[k]);
  return EmbeddingSet(std::move(out), set.dtype, set.modality_tag);
}

EmbeddingSet normalized_rows(const EmbeddingSet& set) {
  EmbeddingSet out = set;
  out.dtype = Dtype::F64;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.data.row(i).norm();
    if (!(n > 0.0)) throw DegenerateError("zero-norm row " + std::to_string(i) + " cannot be normalized");
    out.data.row(i) /= n;
  }
  return out;
}

}  // namespace gapkit
