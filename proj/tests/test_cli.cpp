#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "gapkit/artifact.hpp"
#include "gapkit/cli.hpp"
#include "gapkit/io.hpp"
#include "support.hpp"

using namespace gapkit;
using nlohmann::json;
using testing::TempDir;

namespace {

// Runs the CLI with stdout/stderr captured.
struct Invocation {
  int code;
  std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "gapkit");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write_pair(const TempDir& dir, Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix x = rng.normal_matrix(n, d) * 0.1, y = rng.normal_matrix(n, d) * 0.2;
  x.col(0).array() += 1.0;
  y.col(1).array() += 1.0;
  y.col(2) += 0.5 * y.col(3);
  write_embeddings(EmbeddingSet(x), dir / "x.emb");
  write_embeddings(EmbeddingSet(y), dir / "y.emb");
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("stats on the 2x3 fixture") {
  TempDir dir;
  RowMatrix m(2, 3);
  m << 1, 0, 0, 0, 1, 0;
  write_embeddings(EmbeddingSet(m), dir / "a.emb");
  const auto r = invoke({"stats", "--in", (dir / "a.emb").string(), "--out", (dir / "a.stats").string()});
  CHECK(r.code == 0);
  const auto st = load_payload<ModalityStats>(dir / "a.stats");
  CHECK(st.n == 2);
  CHECK(st.mean == (Vector(3) << 0.5, 0.5, 0).finished());
  CHECK(st.trace == 0.5);
  const auto art = load_artifact(dir / "a.stats");
  CHECK(art.provenance.inputs.at(0).sha256.size() == 64);
  CHECK(art.provenance.parameters.at("command") == "stats");
  CHECK(art.provenance.parameters.at("--shrink") == "0.05");
}

TEST_CASE("align with mismatched dims exits 2") {
  TempDir dir;
  Rng rng(1);
  write_embeddings(EmbeddingSet(rng.normal_matrix(20, 4)), dir / "src.emb");
  write_embeddings(EmbeddingSet(rng.normal_matrix(20, 5)), dir / "tgt.emb");
  const auto r = invoke({"align", "--method", "realign", "--in", (dir / "src.emb").string(), "--calib-src",
                         (dir / "src.emb").string(), "--calib-tgt", (dir / "tgt.emb").string(), "--out",
                         (dir / "o.emb").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("dimension mismatch") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "o.emb"));
}

TEST_CASE("verify gradients prints a table and exits 0") {
  TempDir dir;
  const auto r = invoke({"verify", "--suite", "gradients", "--report", (dir / "v.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  const auto j = read_json(dir / "v.json");
  CHECK(j["results"]["all_passed"] == true);
  CHECK(j["tool"] == "gapkit");
  CHECK(j["flags"]["--suite"] == "gradients");
}

TEST_CASE("usage errors exit 1") {
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"stats"}).code == 1);
  CHECK(invoke({"stats", "--in", "x", "--out", "y", "--bogus"}).code == 1);
  CHECK(invoke({"frobnicate"}).code == 1);
  CHECK(invoke({"verify", "--suite", "nope"}).code == 1);
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"--version"}).code == 0);
}

TEST_CASE("missing or corrupt inputs exit 2") {
  TempDir dir;
  std::ofstream(dir / "bad.csv") << "1,2\n3\n";
  CHECK(invoke({"stats", "--in", (dir / "bad.csv").string(), "--out", (dir / "o").string()}).code == 2);
}

TEST_CASE("frame, decompose and diagnose write reports") {
  TempDir dir;
  write_pair(dir, 400, 6, 2);
  const auto x = (dir / "x.emb").string(), y = (dir / "y.emb").string();
  REQUIRE(invoke({"frame", "--x", x, "--y", y, "--out", (dir / "f.json").string()}).code == 0);
  const auto frame = load_payload<ReferenceFrame>(dir / "f.json");
  CHECK(frame.dims() == 6);

  REQUIRE(invoke({"stats", "--in", x, "--out", (dir / "x.stats").string()}).code == 0);
  REQUIRE(invoke({"stats", "--in", y, "--out", (dir / "y.stats").string(), "--shrink", "0"}).code == 0);
  REQUIRE(invoke({"frame", "--x", (dir / "x.stats").string(), "--y", (dir / "y.stats").string(), "--out",
                  (dir / "f2.json").string()}).code == 0);

  REQUIRE(invoke({"decompose", "--x", x, "--y", y, "--frame", (dir / "f.json").string(), "--report",
                  (dir / "d.json").string(), "--robust"}).code == 0);
  const auto d = read_json(dir / "d.json");
  CHECK(d["results"]["gamma_norm"].get<double>() >= 0.0);
  CHECK(d["results"]["sigma_v"]["shape"]["estimator"] == "tyler");
  CHECK(d["inputs"].size() == 3);

  REQUIRE(invoke({"diagnose", "--a", x, "--b", y, "--report", (dir / "g.json").string(), "--pairs", "5000",
                  "--plots-dir", (dir / "plots").string(), "--seed", "3"}).code == 0);
  const auto g = read_json(dir / "g.json");
  CHECK(g["results"]["modality_gap"].get<double>() > 1.0);
  CHECK(std::filesystem::exists(dir / "plots" / "cosine_histogram.csv"));
  CHECK(std::filesystem::exists(dir / "plots" / "spectrum.csv"));
}

TEST_CASE("align methods and saved operators") {
  TempDir dir;
  write_pair(dir, 500, 6, 3);
  const auto x = (dir / "x.emb").string(), y = (dir / "y.emb").string();
  for (std::string method : {"realign", "blockwise", "c3", "anchor-only"}) {
    CAPTURE(method);
    const auto out = (dir / (method + ".emb")).string();
    const auto saved = (dir / (method + ".json")).string();
    const auto r = invoke({"align", "--method", method, "--in", y, "--calib-src", y, "--calib-tgt", x, "--out", out,
                           "--save-stats", saved, "--seed", "4", "--report", (dir / (method + ".rep")).string()});
    REQUIRE(r.code == 0);
    const auto a = read_embeddings(out);
    CHECK(a.rows() == 500);
    CHECK((a.data.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);

    const auto again = (dir / (method + "2.emb")).string();
    REQUIRE(invoke({"align", "--method", method, "--in", y, "--stats", saved, "--out", again, "--seed", "4"}).code == 0);
    CHECK(read_embeddings(again).data == a.data);
  }
  CHECK(invoke({"align", "--in", y, "--out", (dir / "z.emb").string()}).code == 1);
}

TEST_CASE("sample-curve and bench write CSV") {
  TempDir dir;
  write_pair(dir, 3000, 4, 5);
  const auto r = invoke({"sample-curve", "--src", (dir / "y.emb").string(), "--tgt", (dir / "x.emb").string(),
                         "--sizes", "100,1000", "--trials", "3", "--holdout", "1000", "--out",
                         (dir / "c.csv").string()});
  REQUIRE(r.code == 0);
  std::ifstream c(dir / "c.csv");
  std::string header;
  std::getline(c, header);
  CHECK(header == "n,trials,gap_mean,gap_std");

  CHECK(invoke({"sample-curve", "--src", (dir / "y.emb").string(), "--tgt", (dir / "x.emb").string(), "--sizes",
                "10,abc", "--out", (dir / "c2.csv").string()}).code == 1);

  const auto b = invoke({"bench", "--sizes", "2000,4000", "--dims", "8", "--repeats", "1", "--precision-n", "1000",
                         "--out", (dir / "b.csv").string(), "--report", (dir / "b.json").string()});
  REQUIRE(b.code == 0);
  CHECK(read_json(dir / "b.json")["results"]["rows"].size() == 2);
}

TEST_CASE("simulate writes a trace") {
  TempDir dir;
  std::ofstream(dir / "sim.cfg") << "input_dim = 24\nembed_dim = 12\nbatch_size = 32\nsteps = 40\n"
                                    "probe_size = 128\nlog_interval = 10\n";
  const auto r = invoke({"simulate", "--config", (dir / "sim.cfg").string(), "--trace", (dir / "t.csv").string(),
                         "--report", (dir / "s.json").string(), "--seed", "9"});
  REQUIRE(r.code == 0);
  const auto j = read_json(dir / "s.json");
  CHECK(j["results"]["config"]["data_seed"] == "9");
  CHECK(std::filesystem::exists(dir / "t.csv"));

  std::ofstream(dir / "bad.cfg") << "nonsense = 1\n";
  CHECK(invoke({"simulate", "--config", (dir / "bad.cfg").string()}).code == 1);
}

}  // TEST_SUITE
