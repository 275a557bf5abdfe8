#include <doctest.h>

#include <cstring>
#include <fstream>
#include <limits>

#include "gapkit/error.hpp"
#include "gapkit/io.hpp"
#include "support.hpp"

using namespace gapkit;
using testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

EmbeddingSet fixture_2x3() {
  RowMatrix m(2, 3);
  m << 1, 0, 0, 0, 1, 0;
  return EmbeddingSet(m);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("2x3 fixture loads with N=2, d=3") {
  TempDir dir;
  write_embeddings(fixture_2x3(), dir / "a.emb");
  const auto set = read_embeddings(dir / "a.emb");
  CHECK(set.rows() == 2);
  CHECK(set.dims() == 3);
  CHECK(set.data == fixture_2x3().data);
  CHECK(std::filesystem::file_size(dir / "a.emb") == kEmb1HeaderBytes + 6 * sizeof(double));
}

TEST_CASE("header layout") {
  TempDir dir;
  write_embeddings(fixture_2x3(), dir / "a.emb");
  const std::string bytes = slurp(dir / "a.emb");
  CHECK(bytes.substr(0, 4) == "EMB1");
  std::uint32_t version, dtype, dims, reserved;
  std::uint64_t rows;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&dtype, bytes.data() + 8, 4);
  std::memcpy(&rows, bytes.data() + 12, 8);
  std::memcpy(&dims, bytes.data() + 20, 4);
  std::memcpy(&reserved, bytes.data() + 24, 4);
  CHECK(version == 1);
  CHECK(dtype == 1);
  CHECK(rows == 2);
  CHECK(dims == 3);
  CHECK(reserved == 0);
}

TEST_CASE("empty payload is valid") {
  TempDir dir;
  write_embeddings(EmbeddingSet(RowMatrix(0, 4)), dir / "e.emb");
  const auto set = read_embeddings(dir / "e.emb");
  CHECK(set.rows() == 0);
  CHECK(set.dims() == 4);
  CHECK(set.empty());
}

TEST_CASE("truncated file is rejected") {
  TempDir dir;
  write_embeddings(fixture_2x3(), dir / "a.emb");
  std::string bytes = slurp(dir / "a.emb");
  spit(dir / "short.emb", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_embeddings(dir / "short.emb"), DataError);
  spit(dir / "long.emb", bytes + "xx");
  CHECK_THROWS_AS(read_embeddings(dir / "long.emb"), DataError);
}

TEST_CASE("unknown EMB1 version is a version error") {
  TempDir dir;
  write_embeddings(fixture_2x3(), dir / "a.emb");
  std::string bytes = slurp(dir / "a.emb");
  const std::uint32_t v = 9;
  std::memcpy(bytes.data() + 4, &v, 4);
  spit(dir / "v9.emb", bytes);
  CHECK_THROWS_AS(read_embeddings(dir / "v9.emb"), VersionError);
}

TEST_CASE("1x1 round trip is byte identical") {
  TempDir dir;
  RowMatrix m(1, 1);
  m << 0.5;
  write_embeddings(EmbeddingSet(m), dir / "a.emb");
  write_embeddings(read_embeddings(dir / "a.emb"), dir / "b.emb");
  CHECK(slurp(dir / "a.emb") == slurp(dir / "b.emb"));
}

TEST_CASE("1000x64 random round trip is bitwise") {
  TempDir dir;
  Rng rng(3);
  RowMatrix m = rng.normal_matrix(1000, 64);
  m(3, 5) = std::numeric_limits<double>::denorm_min();
  m(7, 1) = -0.0;
  write_embeddings(EmbeddingSet(m), dir / "a.emb");
  const auto back = read_embeddings(dir / "a.emb");
  REQUIRE(back.rows() == 1000);
  CHECK(std::memcmp(back.data.data(), m.data(), sizeof(double) * m.size()) == 0);
}

TEST_CASE("f32 set keeps float precision") {
  TempDir dir;
  Rng rng(4);
  RowMatrix m = rng.normal_matrix(20, 7);
  m = m.cast<float>().cast<double>();
  write_embeddings(EmbeddingSet(m, Dtype::F32), dir / "f.emb");
  CHECK(std::filesystem::file_size(dir / "f.emb") == kEmb1HeaderBytes + 140 * sizeof(float));
  const auto back = read_embeddings(dir / "f.emb");
  CHECK(back.dtype == Dtype::F32);
  CHECK(back.data == m);
}

TEST_CASE("csv round trip promotes to f64 and is exact") {
  TempDir dir;
  Rng rng(5);
  const RowMatrix m = rng.normal_matrix(11, 3);
  write_embeddings(EmbeddingSet(m), dir / "a.csv", Format::Csv);
  CHECK(detect_format(dir / "a.csv") == Format::Csv);
  const auto back = read_embeddings(dir / "a.csv");
  CHECK(back.dtype == Dtype::F64);
  CHECK(back.data == m);
}

TEST_CASE("csv with ragged rows or garbage is rejected") {
  TempDir dir;
  spit(dir / "r.csv", "1,2,3\n4,5\n");
  CHECK_THROWS_AS(read_embeddings(dir / "r.csv"), DataError);
  spit(dir / "g.csv", "1,2\n3,abc\n");
  CHECK_THROWS_AS(read_embeddings(dir / "g.csv"), DataError);
}

TEST_CASE("non-finite entries are rejected") {
  TempDir dir;
  spit(dir / "n.csv", "1,2\nnan,0\n");
  CHECK_THROWS_AS(read_embeddings(dir / "n.csv"), DataError);

  RowMatrix m = RowMatrix::Ones(3, 2);
  m(2, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate(EmbeddingSet(m)), DataError);
}

TEST_CASE("streaming reader visits every row once in order") {
  TempDir dir;
  RowMatrix m(103, 2);
  for (int i = 0; i < 103; ++i) m.row(i) << i, -i;
  for (auto fmt : {Format::Emb1, Format::Csv}) {
    const auto path = dir / (fmt == Format::Csv ? "s.csv" : "s.emb");
    write_embeddings(EmbeddingSet(m), path, fmt);
    EmbeddingReader reader(path);
    std::vector<double> seen;
    while (auto batch = reader.next_batch(10)) {
      CHECK(batch->rows() <= 10);
      for (Eigen::Index i = 0; i < batch->rows(); ++i) seen.push_back(batch->data(i, 0));
    }
    REQUIRE(seen.size() == 103);
    for (int i = 0; i < 103; ++i) CHECK(seen[i] == i);
    CHECK(reader.rows_read() == 103);
  }
}

TEST_CASE("select_rows and normalized_rows") {
  RowMatrix m(3, 2);
  m << 3, 4, 0, 2, 1, 0;
  const EmbeddingSet set(m);
  const auto sub = select_rows(set, {2, 0});
  CHECK(sub.data(0, 0) == 1);
  CHECK(sub.data(1, 1) == 4);
  const auto n = normalized_rows(set);
  CHECK(n.data(0, 0) == doctest::Approx(0.6));
  CHECK(n.data(1, 1) == 1.0);
}

}  // TEST_SUITE
