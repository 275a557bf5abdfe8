#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace gapkit {

/// Writes a file by streaming into a sibling temp file and renaming it over
/// the destination, so readers never observe a partial file.
void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);
void write_atomic(const std::filesystem::path& path, std::string_view contents);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

/// Number of worker threads for data-parallel loops: GAPKIT_THREADS if set,
/// otherwise 1.
unsigned default_threads();

/// Splits [0, n) into contiguous chunks and runs body(begin, end) on each.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Round-trip decimal rendering of a double (17 significant digits).
std::string format_double(double x);

}  // namespace gapkit
