#include "gapkit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gapkit/artifact.hpp"
#include "gapkit/bench.hpp"
#include "gapkit/diagnostics.hpp"
#include "gapkit/error.hpp"
#include "gapkit/frame.hpp"
#include "gapkit/io.hpp"
#include "gapkit/log.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/oracle.hpp"
#include "gapkit/random.hpp"
#include "gapkit/realign.hpp"
#include "gapkit/simulator.hpp"
#include "gapkit/spectral.hpp"
#include "gapkit/util.hpp"
#include "gapkit/verify.hpp"
#include "gapkit/version.hpp"

namespace gapkit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

struct Context {
  std::string command;
  CLI::App* sub = nullptr;
  std::vector<InputDigest> inputs;

  void add_input(const fs::path& path, std::uint64_t rows) {
    inputs.push_back({path.string(), file_sha256(path), rows});
  }

  std::map<std::string, std::string> flags() const {
    std::map<std::string, std::string> out;
    for (const CLI::Option* opt : sub->get_options()) {
      if (opt->get_name() == "--help") continue;
      std::string name = "--" + opt->get_single_name();
      std::string value;
      if (opt->count() > 0) {
        const auto& res = opt->results();
        for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
        if (res.empty()) value = "true";
      } else if (opt->get_expected_min() == 0) {
        value = "false";
      } else {
        value = opt->get_default_str();
      }
      out[name] = value;
    }
    return out;
  }

  Provenance provenance() const {
    Provenance p;
    p.tool_version = kToolVersion;
    p.inputs = inputs;
    p.parameters = flags();
    p.parameters["command"] = command;
    return p;
  }

  json report(json results) const {
    json ins = json::array();
    for (const auto& in : inputs) ins.push_back({{"path", in.path}, {"sha256", in.sha256}, {"rows", in.rows}});
    return {{"tool", kToolName},  {"version", kToolVersion}, {"command", command},
            {"flags", flags()},   {"inputs", ins},           {"results", std::move(results)}};
  }
};

void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

EmbeddingSet load_set(Context& ctx, const fs::path& path, const char* tag) {
  EmbeddingSet set = read_embeddings(path);
  set.modality_tag = tag;
  ctx.add_input(path, static_cast<std::uint64_t>(set.rows()));
  return set;
}

void require_same_dims(const EmbeddingSet& a, const EmbeddingSet& b, const char* what) {
  if (a.dims() != b.dims())
    throw DataError(std::string(what) + ": dimension mismatch (d=" + std::to_string(a.dims()) + " vs d=" +
                    std::to_string(b.dims()) + ")");
}

std::vector<std::int64_t> parse_sizes(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || v < 1 || v != std::floor(v)) throw std::invalid_argument(item);
      out.push_back(static_cast<std::int64_t>(v));
    } catch (const std::exception&) {
      throw UsageError("bad size '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty size list");
  return out;
}

Matrix covariance_of(const EmbeddingSet& set, double shrink_lambda) {
  if (set.rows() < 2) throw DataError("covariance needs at least 2 rows (got " + std::to_string(set.rows()) + ")");
  Matrix c = sample_covariance(set.data);
  return shrink_lambda > 0 ? shrink(c, shrink_lambda) : c;
}

json spectrum_summary(const Vector& eig) {
  json j{{"condition_number", condition_number(eig)}, {"effective_rank", effective_rank(eig)}};
  if (eig.size() >= 3) j["power_law_alpha"] = power_law_alpha(eig);
  return j;
}

void write_series_csv(const fs::path& path, const std::string& header, const std::vector<std::vector<double>>& cols) {
  write_atomic(path, [&](std::ostream& out) {
    out << header << '\n';
    const std::size_t rows = cols.empty() ? 0 : cols.front().size();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << format_double(cols[c][i]);
      out << '\n';
    }
  });
}

// ---------------------------------------------------------------------------
// Subcommands

struct StatsArgs {
  std::string in, out;
  bool no_cov = false;
  double shrink = 0.05;
  std::size_t batch_rows = 65536;
};

int cmd_stats(Context& ctx, const StatsArgs& a) {
  EmbeddingReader reader(a.in);
  MomentAccumulator acc(reader.dims(), !a.no_cov);
  while (auto batch = reader.next_batch(a.batch_rows)) acc.accumulate(*batch);
  ModalityStats st = finalize(acc);
  if (st.covariance && a.shrink > 0) st.covariance = shrink(*st.covariance, a.shrink);
  ctx.add_input(a.in, acc.n());
  save_artifact({kArtifactSchemaVersion, st, ctx.provenance()}, a.out);
  log::info("stats: n=" + std::to_string(st.n) + " d=" + std::to_string(st.dims()) + " trace=" + format_double(st.trace));
  return 0;
}

struct FrameArgs {
  std::string x, y, out;
  double energy = kDefaultEnergy;
  double shrink = 0.0;
  std::int64_t step = 0;
};

int cmd_frame(Context& ctx, const FrameArgs& a) {
  Matrix sx, sy;
  auto covariance_from = [&](const std::string& path, const char* tag) {
    if (detect_format(path) == Format::Emb1 || fs::path(path).extension() == ".csv") {
      return covariance_of(load_set(ctx, path, tag), a.shrink);
    }
    ModalityStats st = load_payload<ModalityStats>(path);
    ctx.add_input(path, st.n);
    if (!st.covariance) throw DataError(path + ": statistics were computed without covariance");
    return a.shrink > 0 ? shrink(*st.covariance, a.shrink) : *st.covariance;
  };
  sx = covariance_from(a.x, "x");
  sy = covariance_from(a.y, "y");
  if (sx.rows() != sy.rows()) throw DataError("frame: dimension mismatch between x and y");
  const ReferenceFrame f = build_frame(sx, sy, a.energy, a.step);
  save_artifact({kArtifactSchemaVersion, f, ctx.provenance()}, a.out);
  log::info("frame: r=" + std::to_string(f.rank()) + " of d=" + std::to_string(f.dims()));
  return 0;
}

struct DecomposeArgs {
  std::string x, y, frame, report, residuals_dir;
  bool robust = false;
  double ridge = 1e-3;
};

int cmd_decompose(Context& ctx, const DecomposeArgs& a) {
  const EmbeddingSet x = load_set(ctx, a.x, "x");
  const EmbeddingSet y = load_set(ctx, a.y, "y");
  require_same_dims(x, y, "decompose");
  const ReferenceFrame frame = load_payload<ReferenceFrame>(a.frame);
  ctx.add_input(a.frame, 0);
  const GapDecomposition g = decompose_gap(x, y, frame);
  const Matrix c = complement_basis(frame);
  const RowMatrix zeta_v = g.zeta * c;

  json res;
  res["rank"] = frame.rank();
  res["dims"] = frame.dims();
  res["pairs"] = x.rows();
  res["mean_gap_norm"] = g.mean_gap.norm();
  res["beta"] = to_json(g.beta);
  res["beta_norm"] = g.beta.norm();
  res["gamma_norm"] = g.gamma.norm();
  res["gamma"] = to_json(g.gamma);

  const Matrix sigma_u = sample_covariance(g.delta);
  res["sigma_u"] = spectrum_summary(sym_eig(sigma_u).eigenvalues);
  if (c.cols() > 0) {
    const Matrix sigma_v_sample = sample_covariance(zeta_v);
    Matrix sigma_v_shape = sigma_v_sample;
    json shape_info{{"estimator", "sample"}};
    if (a.robust) {
      const ShapeEstimate est = tyler_shape(zeta_v);
      sigma_v_shape = est.sigma_hat;
      shape_info = {{"estimator", "tyler"},
                    {"iterations", est.iterations},
                    {"converged", est.converged},
                    {"regularized", est.regularized}};
    }
    json v = spectrum_summary(sym_eig(sigma_v_shape).eigenvalues);
    v["shape"] = shape_info;
    res["sigma_v"] = v;
    if (g.gamma.norm() > 0) res["gamma_noise_angle_deg"] = gamma_noise_angle(g.gamma, c * sigma_v_sample * c.transpose());
    const CouplingEstimate ce = estimate_coupling(g.delta, zeta_v, a.ridge);
    res["coupling"] = {{"spectral_norm", ce.spectral_norm}, {"r_squared", ce.r_squared}, {"ridge_lambda", ce.ridge_lambda}};
  }
  write_json(a.report, ctx.report(res));

  if (!a.residuals_dir.empty()) {
    fs::create_directories(a.residuals_dir);
    write_embeddings(EmbeddingSet(g.delta), fs::path(a.residuals_dir) / "delta.csv", Format::Csv);
    write_embeddings(EmbeddingSet(zeta_v), fs::path(a.residuals_dir) / "zeta_v.csv", Format::Csv);
  }
  return 0;
}

struct AlignArgs {
  std::string method = "realign";
  std::string in, out, stats, calib_src, calib_tgt, save_stats, frame, report;
  double eps = kDefaultRealignEps;
  double sigma = kDefaultC3Sigma;
  double eig_floor = kDefaultEigFloor;
  double energy = kDefaultEnergy;
  std::uint64_t seed = 0;
};

int cmd_align(Context& ctx, const AlignArgs& a) {
  const bool from_stats = !a.stats.empty();
  const bool from_calib = !a.calib_src.empty() || !a.calib_tgt.empty();
  if (from_stats == from_calib) throw UsageError("align: give either --stats or both --calib-src and --calib-tgt");
  if (from_calib && (a.calib_src.empty() || a.calib_tgt.empty()))
    throw UsageError("align: --calib-src and --calib-tgt go together");
  if (from_stats && !a.save_stats.empty()) throw UsageError("align: --save-stats needs calibration inputs");

  const EmbeddingSet input = load_set(ctx, a.in, "source");
  std::optional<EmbeddingSet> cs, ct;
  if (from_calib) {
    cs = load_set(ctx, a.calib_src, "source");
    ct = load_set(ctx, a.calib_tgt, "target");
    require_same_dims(*cs, *ct, "align calibration");
  }

  EmbeddingSet output;
  json res{{"method", a.method}};
  std::optional<ArtifactPayload> calibrated;

  if (a.method == "realign" || a.method == "anchor-only" || a.method == "c3") {
    AlignmentStats st;
    if (from_stats) {
      st = load_payload<AlignmentStats>(a.stats);
      ctx.add_input(a.stats, st.calib_n);
    } else {
      const ModalityStats ss = compute_stats(*cs, false);
      const ModalityStats ts = compute_stats(*ct, false);
      st = a.method == "realign" ? estimate_realign(ss, ts, *cs, a.eps) : affine_stats(ss, ts, a.eps);
      calibrated = st;
    }
    if (a.method == "realign") output = substitution_operator(input, st);
    else if (a.method == "anchor-only") output = apply_anchor_only(input, st.mu_src, st.mu_tgt);
    else output = apply_c3_baseline(input, st.mu_src, st.mu_tgt, a.sigma, a.seed);
    res["scale"] = st.s;
    res["modality_gap_before"] = modality_gap(st.mu_src, st.mu_tgt);
  } else if (a.method == "blockwise") {
    BlockwiseStats st;
    if (from_stats) {
      st = load_payload<BlockwiseStats>(a.stats);
      ctx.add_input(a.stats, st.calib_n);
    } else {
      ReferenceFrame frame;
      if (!a.frame.empty()) {
        frame = load_payload<ReferenceFrame>(a.frame);
        ctx.add_input(a.frame, 0);
      } else {
        frame = build_frame(covariance_of(*cs, 0.0), covariance_of(*ct, 0.0), a.energy);
      }
      st = estimate_blockwise(frame, *cs, *ct, a.eig_floor);
      calibrated = st;
    }
    output = apply_blockwise(input, st);
    res["rank"] = st.frame.rank();
    res["floored_u"] = st.floored_u;
    res["floored_v"] = st.floored_v;
    if (st.floored_u || st.floored_v) log::warn("align: eigenvalue floor engaged on the source covariance");
  } else {
    throw UsageError("align: unknown method '" + a.method + "' (realign, blockwise, c3, anchor-only)");
  }

  write_embeddings(output, a.out, fs::path(a.out).extension() == ".csv" ? Format::Csv : Format::Emb1);
  if (calibrated && !a.save_stats.empty())
    save_artifact({kArtifactSchemaVersion, *calibrated, ctx.provenance()}, a.save_stats);
  res["rows"] = output.rows();
  res["output_mean_norm"] = column_mean(output.data).norm();
  if (!a.report.empty()) write_json(a.report, ctx.report(res));
  return 0;
}

struct DiagnoseArgs {
  std::string a, b, report, plots_dir;
  std::uint64_t pairs = kDefaultCosinePairs;
  int bins = kDefaultCosineBins;
  bool smooth = false;
  int k = 20;
  std::int64_t knn_max = 5000;
  std::uint64_t seed = 0;
};

EmbeddingSet knn_subset(const EmbeddingSet& set, std::int64_t max_rows, Rng& rng) {
  if (set.rows() <= max_rows) return set;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(set.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (std::size_t i = 0; i < static_cast<std::size_t>(max_rows); ++i) {
    const auto j = i + rng.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(max_rows));
  std::sort(idx.begin(), idx.end());
  return select_rows(set, idx);
}

int cmd_diagnose(Context& ctx, const DiagnoseArgs& a) {
  const EmbeddingSet sa = load_set(ctx, a.a, "a");
  const EmbeddingSet sb = load_set(ctx, a.b, "b");
  require_same_dims(sa, sb, "diagnose");

  const Vector mu_a = column_mean(sa.data), mu_b = column_mean(sb.data);
  const CosineHistogram ha = cosine_histogram(sa, a.pairs, a.bins, a.smooth, a.seed);
  const CosineHistogram hb = cosine_histogram(sb, a.pairs, a.bins, a.smooth, a.seed + 1);
  const Vector eig_a = sym_eig(covariance_of(sa, 0.0)).eigenvalues;
  const Vector eig_b = sym_eig(covariance_of(sb, 0.0)).eigenvalues;

  Rng rng(a.seed);
  const EmbeddingSet ka = knn_subset(sa, a.knn_max, rng);
  const EmbeddingSet kb = knn_subset(sb, a.knn_max, rng);

  json res;
  res["modality_gap"] = modality_gap(mu_a, mu_b);
  res["cosine_js_divergence"] = js_divergence(ha, hb);
  res["cosine_pairs"] = {ha.pair_count, hb.pair_count};
  res["knn_mixing_rate"] = knn_mixing_rate(ka, kb, a.k);
  res["knn_rows"] = {ka.rows(), kb.rows()};
  res["spectrum_a"] = spectrum_summary(eig_a);
  res["spectrum_b"] = spectrum_summary(eig_b);
  res["trace_a"] = eig_a.sum();
  res["trace_b"] = eig_b.sum();
  if (sa.rows() == sb.rows()) res["knn_overlap"] = knn_overlap(ka.rows() == kb.rows() && ka.rows() == sa.rows() ? sa : ka,
                                                               ka.rows() == kb.rows() && kb.rows() == sb.rows() ? sb : kb, a.k)
                                                      .overlap;
  write_json(a.report, ctx.report(res));

  if (!a.plots_dir.empty()) {
    fs::create_directories(a.plots_dir);
    std::vector<double> centers;
    for (int i = 0; i < ha.bins(); ++i) centers.push_back(0.5 * (ha.bin_edges[i] + ha.bin_edges[i + 1]));
    write_series_csv(fs::path(a.plots_dir) / "cosine_histogram.csv", "bin_center,mass_a,mass_b",
                     {centers, ha.masses, hb.masses});
    std::vector<double> k, la(eig_a.data(), eig_a.data() + eig_a.size()), lb(eig_b.data(), eig_b.data() + eig_b.size());
    for (Eigen::Index i = 0; i < eig_a.size(); ++i) k.push_back(static_cast<double>(i + 1));
    write_series_csv(fs::path(a.plots_dir) / "spectrum.csv", "k,eigenvalue_a,eigenvalue_b", {k, la, lb});
  }
  return 0;
}

struct SimulateArgs {
  std::string config, trace, report;
  bool ablation = false;
  int seeds = 5;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(Context& ctx, const SimulateArgs& a) {
  SimulationConfig cfg;
  if (!a.config.empty()) {
    cfg = load_simulation_config(a.config);
    ctx.add_input(a.config, 0);
  }
  if (a.seed) {
    cfg.data_seed = *a.seed;
    cfg.init_seed_x = *a.seed + 1;
    cfg.init_seed_y = *a.seed + 2;
    cfg.batch_seed = *a.seed + 3;
  }
  json res{{"config", describe(cfg)}};
  if (!a.trace.empty() || !a.ablation) {
    const TrainingTrace t = run_toy_training(cfg);
    if (!a.trace.empty()) write_atomic(a.trace, [&](std::ostream& out) { write_trace_csv(t, out); });
    const TraceRow& last = t.rows.back();
    res["rank"] = t.rank;
    res["t0"] = t.t0;
    res["logged_steps"] = t.rows.size();
    res["final"] = {{"step", last.step},
                    {"loss", last.loss},
                    {"gamma_norm", last.gamma_norm},
                    {"gap_norm", last.gap_norm},
                    {"rho_align", last.rho_align},
                    {"kappa_u", last.kappa_u},
                    {"kappa_v", last.kappa_v}};
    res["probe_gradient_note"] = "G_U is the covariance of per-sample probe gradients, not a Fisher approximation";
  }
  if (a.ablation) {
    const AblationReport rep = gap_necessity_ablation(cfg, a.seeds);
    json vars = json::array();
    for (const auto& v : rep.variants) {
      json jv{{"name", v.name},
              {"terminal_gamma", v.terminal_gamma},
              {"terminal_gap", v.terminal_gap},
              {"mean_gamma", v.mean_gamma},
              {"mean_gap", v.mean_gap}};
      if (!v.error.empty()) jv["error"] = v.error;
      vars.push_back(jv);
    }
    res["ablation"] = {{"seeds", rep.seeds}, {"variants", vars}};
    for (const auto& v : rep.variants)
      std::cout << v.name << ": mean terminal gamma " << format_double(v.mean_gamma) << ", gap "
                << format_double(v.mean_gap) << (v.error.empty() ? "" : " (" + v.error + ")") << '\n';
  }
  if (!a.report.empty()) write_json(a.report, ctx.report(res));
  return 0;
}

struct VerifyArgs {
  std::string suite = "all";
  std::string report;
  std::uint64_t seed = 7;
};

int cmd_verify(Context& ctx, const VerifyArgs& a) {
  const auto checks = run_verify(a.suite, a.seed);
  write_verify_table(checks, std::cout);
  const bool ok = std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
  if (!a.report.empty()) {
    json arr = json::array();
    for (const auto& c : checks)
      arr.push_back({{"suite", c.suite},
                     {"name", c.name},
                     {"value", c.value},
                     {"relation", c.relation},
                     {"threshold", c.threshold},
                     {"passed", c.passed},
                     {"detail", c.detail}});
    write_json(a.report, ctx.report({{"checks", arr}, {"all_passed", ok}}));
  }
  if (!ok) throw DegenerateError("verify: one or more checks failed");
  return 0;
}

struct CurveArgs {
  std::string src, tgt, sizes, out, report;
  int trials = 5;
  std::int64_t holdout = 10000;
  std::uint64_t seed = 0;
  double eps = kDefaultRealignEps;
};

int cmd_curve(Context& ctx, const CurveArgs& a) {
  const EmbeddingSet src = load_set(ctx, a.src, "source");
  const EmbeddingSet tgt = load_set(ctx, a.tgt, "target");
  require_same_dims(src, tgt, "sample-curve");
  CurveOptions o;
  o.sizes = parse_sizes(a.sizes);
  o.trials = a.trials;
  o.holdout = a.holdout;
  o.seed = a.seed;
  o.eps = a.eps;
  const auto curve = sample_complexity_curve(src, tgt, o);
  write_atomic(a.out, [&](std::ostream& out) {
    out << "n,trials,gap_mean,gap_std\n";
    for (const auto& p : curve)
      out << p.n << ',' << p.gaps.size() << ',' << format_double(p.gap_mean) << ',' << format_double(p.gap_std) << '\n';
  });
  if (!a.report.empty()) {
    json pts = json::array();
    for (const auto& p : curve) pts.push_back({{"n", p.n}, {"gap_mean", p.gap_mean}, {"gap_std", p.gap_std}, {"gaps", p.gaps}});
    write_json(a.report, ctx.report({{"points", pts}}));
  }
  return 0;
}

struct BenchArgs {
  std::string sizes = "100000,500000,1000000";
  std::string out, report;
  int dims = 64;
  int repeats = 3;
  std::uint64_t precision_n = 500000;
  std::uint64_t seed = 11;
  bool no_cov = false;
};

int cmd_bench(Context& ctx, const BenchArgs& a) {
  BenchOptions o;
  o.sizes.clear();
  for (auto n : parse_sizes(a.sizes)) o.sizes.push_back(static_cast<std::uint64_t>(n));
  o.dims = a.dims;
  o.repeats = a.repeats;
  o.precision_n = a.precision_n;
  o.seed = a.seed;
  o.track_cov = !a.no_cov;
  const BenchReport rep = run_bench(o);
  if (!a.out.empty()) write_atomic(a.out, [&](std::ostream& out) { write_bench_csv(rep, out); });
  else write_bench_csv(rep, std::cout);
  if (!a.report.empty()) {
    json rows = json::array();
    for (const auto& r : rep.rows)
      rows.push_back({{"n", r.n}, {"seconds", r.seconds}, {"ns_per_row", r.ns_per_row}, {"state_bytes", r.state_bytes}});
    json prec{{"n", rep.precision.n}, {"f32_error", rep.precision.f32_error}, {"f64_error", rep.precision.f64_error}};
    if (std::isfinite(rep.precision.ratio)) prec["ratio"] = rep.precision.ratio;
    else prec["ratio"] = "inf";
    write_json(a.report, ctx.report({{"dims", rep.dims}, {"rows", rows}, {"precision", prec}}));
  }
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Modality-gap geometry and training-free alignment toolkit", kToolName};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  bool quiet = false, verbose = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");
  app.add_flag("-v,--verbose", verbose, "Print progress information");

  std::map<std::string, std::function<int(Context&)>> handlers;
  Context ctx;

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "Streaming mean, trace and covariance of an embedding set");
  s->add_option("--in", stats.in, "Input embeddings (EMB1 or CSV)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", stats.out, "Output statistics artifact")->required();
  s->add_flag("--no-cov", stats.no_cov, "Skip covariance (O(d) state)");
  s->add_option("--shrink", stats.shrink, "Covariance shrinkage toward (tr/d) I")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  s->add_option("--batch-rows", stats.batch_rows, "Rows per streamed batch")->capture_default_str()->check(CLI::PositiveNumber);
  handlers["stats"] = [&](Context& c) { return cmd_stats(c, stats); };

  FrameArgs frame;
  auto* f = app.add_subcommand("frame", "Build the reference frame U from two modalities");
  f->add_option("--x", frame.x, "Embeddings or statistics artifact of modality x")->required()->check(CLI::ExistingFile);
  f->add_option("--y", frame.y, "Embeddings or statistics artifact of modality y")->required()->check(CLI::ExistingFile);
  f->add_option("--out", frame.out, "Output frame artifact")->required();
  f->add_option("--energy", frame.energy, "Cumulative energy threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  f->add_option("--shrink", frame.shrink, "Covariance shrinkage before the eigendecomposition")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  f->add_option("--step", frame.step, "Reference step t0 recorded in the frame")->capture_default_str();
  handlers["frame"] = [&](Context& c) { return cmd_frame(c, frame); };

  DecomposeArgs dec;
  auto* d = app.add_subcommand("decompose", "Split the paired gap into bias and residual components");
  d->add_option("--x", dec.x, "Paired embeddings, modality x")->required()->check(CLI::ExistingFile);
  d->add_option("--y", dec.y, "Paired embeddings, modality y")->required()->check(CLI::ExistingFile);
  d->add_option("--frame", dec.frame, "Frame artifact")->required()->check(CLI::ExistingFile);
  d->add_option("--report", dec.report, "JSON report")->required();
  d->add_option("--residuals-dir", dec.residuals_dir, "Write delta and zeta coordinates as CSV");
  d->add_flag("--robust", dec.robust, "Tyler shape estimate for the V residuals");
  d->add_option("--ridge", dec.ridge, "Ridge lambda for the coupling estimate")->capture_default_str()->check(CLI::NonNegativeNumber);
  handlers["decompose"] = [&](Context& c) { return cmd_decompose(c, dec); };

  AlignArgs al;
  auto* a = app.add_subcommand("align", "Apply an alignment operator to source embeddings");
  a->add_option("--method", al.method, "realign, blockwise, c3 or anchor-only")
      ->capture_default_str()
      ->check(CLI::IsMember({"realign", "blockwise", "c3", "anchor-only"}));
  a->add_option("--in", al.in, "Source embeddings to transform")->required()->check(CLI::ExistingFile);
  a->add_option("--out", al.out, "Output embeddings (.csv for CSV, otherwise EMB1)")->required();
  a->add_option("--stats", al.stats, "Saved alignment artifact")->check(CLI::ExistingFile);
  a->add_option("--calib-src", al.calib_src, "Source calibration embeddings")->check(CLI::ExistingFile);
  a->add_option("--calib-tgt", al.calib_tgt, "Target calibration embeddings")->check(CLI::ExistingFile);
  a->add_option("--save-stats", al.save_stats, "Persist the calibrated operator");
  a->add_option("--frame", al.frame, "Frame artifact for blockwise calibration")->check(CLI::ExistingFile);
  a->add_option("--energy", al.energy, "Energy threshold when blockwise builds its own frame")->capture_default_str();
  a->add_option("--eps", al.eps, "Trace-ratio epsilon")->capture_default_str()->check(CLI::NonNegativeNumber);
  a->add_option("--sigma", al.sigma, "Isotropic noise level of the c3 baseline")->capture_default_str()->check(CLI::NonNegativeNumber);
  a->add_option("--eig-floor", al.eig_floor, "Relative eigenvalue floor for blockwise")->capture_default_str()->check(CLI::NonNegativeNumber);
  a->add_option("--seed", al.seed, "Noise seed for c3")->capture_default_str();
  a->add_option("--report", al.report, "JSON report");
  handlers["align"] = [&](Context& c) { return cmd_align(c, al); };

  DiagnoseArgs dg;
  auto* g = app.add_subcommand("diagnose", "Gap, cosine-distribution, spectrum and neighbourhood diagnostics");
  g->add_option("--a", dg.a, "First embedding set")->required()->check(CLI::ExistingFile);
  g->add_option("--b", dg.b, "Second embedding set")->required()->check(CLI::ExistingFile);
  g->add_option("--report", dg.report, "JSON report")->required();
  g->add_option("--plots-dir", dg.plots_dir, "Directory for CSV series");
  g->add_option("--pairs", dg.pairs, "Cosine pairs per set")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--bins", dg.bins, "Histogram bins on [-1, 1]")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_flag("--smooth", dg.smooth, "Triangular smoothing of the histograms");
  g->add_option("--k", dg.k, "Neighbours for kNN statistics")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--knn-max", dg.knn_max, "Rows per set used for kNN (seeded subsample)")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--seed", dg.seed, "Sampling seed")->capture_default_str();
  handlers["diagnose"] = [&](Context& c) { return cmd_diagnose(c, dg); };

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Toy dual-encoder training with geometric logging");
  m->add_option("--config", sim.config, "key = value configuration file")->check(CLI::ExistingFile);
  m->add_option("--trace", sim.trace, "Trace CSV output");
  m->add_option("--report", sim.report, "JSON report");
  m->add_flag("--ablation", sim.ablation, "Run the gap-necessity ablation");
  m->add_option("--seeds", sim.seeds, "Seeds per ablation variant")->capture_default_str()->check(CLI::PositiveNumber);
  m->add_option("--seed", sim.seed, "Base seed (data, both encoders, batches)");
  handlers["simulate"] = [&](Context& c) { return cmd_simulate(c, sim); };

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Run the gradient, span, bound and coupling oracles");
  v->add_option("--suite", ver.suite, "gradients, span, bounds, coupling or all")
      ->capture_default_str()
      ->check(CLI::IsMember({"gradients", "span", "bounds", "coupling", "all"}));
  v->add_option("--report", ver.report, "JSON report");
  v->add_option("--seed", ver.seed, "Seed for random batches")->capture_default_str();
  handlers["verify"] = [&](Context& c) { return cmd_verify(c, ver); };

  CurveArgs cu;
  auto* c = app.add_subcommand("sample-curve", "Held-out gap of ReAlign versus calibration size");
  c->add_option("--src", cu.src, "Source embeddings")->required()->check(CLI::ExistingFile);
  c->add_option("--tgt", cu.tgt, "Target embeddings")->required()->check(CLI::ExistingFile);
  c->add_option("--sizes", cu.sizes, "Comma-separated calibration sizes")->required();
  c->add_option("--out", cu.out, "Curve CSV")->required();
  c->add_option("--report", cu.report, "JSON report");
  c->add_option("--trials", cu.trials, "Trials per size")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--holdout", cu.holdout, "Held-out rows taken from the end of each set")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--seed", cu.seed, "Subsampling seed")->capture_default_str();
  c->add_option("--eps", cu.eps, "Trace-ratio epsilon")->capture_default_str()->check(CLI::NonNegativeNumber);
  handlers["sample-curve"] = [&](Context& c2) { return cmd_curve(c2, cu); };

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Streaming accumulation timing and precision replay");
  b->add_option("--sizes", be.sizes, "Comma-separated row counts")->capture_default_str();
  b->add_option("--dims", be.dims, "Embedding dimension")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--repeats", be.repeats, "Best-of repetitions per size")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--precision-n", be.precision_n, "Rows in the f32/f64 replay (0 skips it)")->capture_default_str();
  b->add_option("--seed", be.seed, "Data seed")->capture_default_str();
  b->add_flag("--no-cov", be.no_cov, "Time mean/trace accumulation only");
  b->add_option("--out", be.out, "CSV output (stdout if omitted)");
  b->add_option("--report", be.report, "JSON report");
  handlers["bench"] = [&](Context& c2) { return cmd_bench(c2, be); };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }

  log::set_level(quiet ? log::Level::Quiet : verbose ? log::Level::Info : log::Level::Warn);
  CLI::App* chosen = app.get_subcommands().front();
  ctx.command = chosen->get_name();
  ctx.sub = chosen;
  try {
    return handlers.at(ctx.command)(ctx);
  } catch (const UsageError& e) {
    std::cerr << ctx.command << ": usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << ctx.command << ": data error: " << e.what() << '\n';
    return 2;
  } catch (const DegenerateError& e) {
    std::cerr << ctx.command << ": numerical error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << ctx.command << ": data error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace gapkit::cli
