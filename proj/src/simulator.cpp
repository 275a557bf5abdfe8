#include "gapkit/simulator.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "gapkit/error.hpp"
#include "gapkit/frame.hpp"
#include "gapkit/io.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/oracle.hpp"
#include "gapkit/random.hpp"
#include "gapkit/spectral.hpp"
#include "gapkit/util.hpp"

namespace gapkit {

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !(in >> std::ws).eof()) throw UsageError("config: bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config: bad boolean for " + key + ": '" + value + "'");
}

}  // namespace

SimulationConfig parse_simulation_config(const std::string& text) {
  SimulationConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "latent_dim") c.latent_dim = parse_number<int>(key, value);
    else if (key == "input_dim") c.input_dim = parse_number<int>(key, value);
    else if (key == "embed_dim") c.embed_dim = parse_number<int>(key, value);
    else if (key == "latent_decay") c.latent_decay = parse_number<double>(key, value);
    else if (key == "input_noise") c.input_noise = parse_number<double>(key, value);
    else if (key == "latent_noise") c.latent_noise = parse_number<double>(key, value);
    else if (key == "jitter_decay") c.jitter_decay = parse_number<double>(key, value);
    else if (key == "common_offset") c.common_offset = parse_number<double>(key, value);
    else if (key == "modality_offset") c.modality_offset = parse_number<double>(key, value);
    else if (key == "map_perturbation") c.map_perturbation = parse_number<double>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
    else if (key == "steps") c.steps = parse_number<int>(key, value);
    else if (key == "temperature") c.temperature = parse_number<double>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "probe_size") c.probe_size = parse_number<int>(key, value);
    else if (key == "log_interval") c.log_interval = parse_number<int>(key, value);
    else if (key == "t0") c.t0 = parse_number<int>(key, value);
    else if (key == "energy") c.energy = parse_number<double>(key, value);
    else if (key == "ridge_lambda") c.ridge_lambda = parse_number<double>(key, value);
    else if (key == "drift_eps") c.drift_eps = parse_number<double>(key, value);
    else if (key == "data_seed") c.data_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "init_seed_x") c.init_seed_x = parse_number<std::uint64_t>(key, value);
    else if (key == "init_seed_y") c.init_seed_y = parse_number<std::uint64_t>(key, value);
    else if (key == "batch_seed") c.batch_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "shared_encoder") c.shared_encoder = parse_bool(key, value);
    else if (key == "normalize_output") c.normalize_output = parse_bool(key, value);
    else if (key == "head") {
      if (value == "dot") c.head = SimilarityHead::DotProduct;
      else if (value == "sqdist") c.head = SimilarityHead::SquaredDistance;
      else throw UsageError("config: head must be dot or sqdist");
    } else if (key == "probe_gradient") {
      if (value == "batch_mean") c.probe_gradient = ProbeGradient::BatchMean;
      else if (value == "per_sample") c.probe_gradient = ProbeGradient::PerSample;
      else throw UsageError("config: probe_gradient must be batch_mean or per_sample");
    } else if (key == "v_shape") {
      if (value == "sample") c.v_shape = NoiseShape::Sample;
      else if (value == "tyler") c.v_shape = NoiseShape::Tyler;
      else throw UsageError("config: v_shape must be sample or tyler");
    } else {
      throw UsageError("config: unknown key '" + key + "'");
    }
  }
  return c;
}

SimulationConfig load_simulation_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_simulation_config(buf.str());
}

std::map<std::string, std::string> describe(const SimulationConfig& c) {
  auto num = [](double v) { return format_double(v); };
  return {
      {"latent_dim", std::to_string(c.latent_dim)},
      {"input_dim", std::to_string(c.input_dim)},
      {"embed_dim", std::to_string(c.embed_dim)},
      {"latent_decay", num(c.latent_decay)},
      {"input_noise", num(c.input_noise)},
      {"latent_noise", num(c.latent_noise)},
      {"jitter_decay", num(c.jitter_decay)},
      {"common_offset", num(c.common_offset)},
      {"modality_offset", num(c.modality_offset)},
      {"map_perturbation", num(c.map_perturbation)},
      {"batch_size", std::to_string(c.batch_size)},
      {"steps", std::to_string(c.steps)},
      {"temperature", num(c.temperature)},
      {"learning_rate", num(c.learning_rate)},
      {"probe_size", std::to_string(c.probe_size)},
      {"log_interval", std::to_string(c.log_interval)},
      {"t0", std::to_string(c.resolved_t0())},
      {"energy", num(c.energy)},
      {"ridge_lambda", num(c.ridge_lambda)},
      {"drift_eps", num(c.drift_eps)},
      {"data_seed", std::to_string(c.data_seed)},
      {"init_seed_x", std::to_string(c.init_seed_x)},
      {"init_seed_y", std::to_string(c.init_seed_y)},
      {"batch_seed", std::to_string(c.batch_seed)},
      {"shared_encoder", c.shared_encoder ? "true" : "false"},
      {"normalize_output", c.normalize_output ? "true" : "false"},
      {"head", c.head == SimilarityHead::DotProduct ? "dot" : "sqdist"},
      {"probe_gradient", c.probe_gradient == ProbeGradient::BatchMean ? "batch_mean" : "per_sample"},
      {"v_shape", c.v_shape == NoiseShape::Sample ? "sample" : "tyler"},
  };
}

// ---------------------------------------------------------------------------
// Model

namespace {

void check_config(const SimulationConfig& c) {
  if (c.latent_dim < 1 || c.input_dim < 1 || c.embed_dim < 2) throw UsageError("simulate: dimensions must be positive");
  if (c.batch_size < 2) throw UsageError("simulate: batch_size must be at least 2");
  if (c.steps < 0) throw UsageError("simulate: steps must be non-negative");
  if (!(c.temperature > 0.0)) throw UsageError("simulate: temperature must be positive");
  if (c.learning_rate < 0.0) throw UsageError("simulate: learning_rate must be non-negative");
  if (c.probe_size < 4) throw UsageError("simulate: probe_size must be at least 4");
  if (c.log_interval < 1) throw UsageError("simulate: log_interval must be positive");
  if (c.resolved_t0() > c.steps) throw UsageError("simulate: t0 exceeds steps");
  if (!(c.energy > 0.0 && c.energy <= 1.0)) throw UsageError("simulate: energy must lie in (0, 1]");
}

struct World {
  Matrix map_x;  // input x latent
  Matrix map_y;
  Vector offset_x;
  Vector offset_y;
  Vector latent_std;
  double noise = 0.0;
  Vector jitter_std;

  explicit World(const SimulationConfig& c) {
    Rng rng(c.data_seed);
    const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(c.latent_dim));
    const Matrix shared = rng.normal_matrix(c.input_dim, c.latent_dim) * inv_sqrt_k;
    map_x = shared + c.map_perturbation * Matrix(rng.normal_matrix(c.input_dim, c.latent_dim)) * inv_sqrt_k;
    map_y = shared + c.map_perturbation * Matrix(rng.normal_matrix(c.input_dim, c.latent_dim)) * inv_sqrt_k;
    const Vector common = c.common_offset * rng.unit_vector(c.input_dim);
    offset_x = common + c.modality_offset * rng.unit_vector(c.input_dim);
    offset_y = common + c.modality_offset * rng.unit_vector(c.input_dim);
    latent_std.resize(c.latent_dim);
    for (int k = 0; k < c.latent_dim; ++k) latent_std[k] = std::pow(k + 1.0, -0.5 * c.latent_decay);
    noise = c.input_noise;
    jitter_std.resize(c.latent_dim);
    for (int k = 0; k < c.latent_dim; ++k) jitter_std[k] = c.latent_noise * std::pow((k + 1.0) / c.latent_dim, 0.5 * c.jitter_decay);
  }

  void sample(Rng& rng, Eigen::Index n, RowMatrix& x, RowMatrix& y) const {
    const Eigen::Index k = latent_std.size();
    const RowMatrix z = rng.normal_matrix(n, k);
    const RowMatrix signal = z * latent_std.asDiagonal();
    const RowMatrix zx = signal + RowMatrix(rng.normal_matrix(n, k)) * jitter_std.asDiagonal();
    const RowMatrix zy = signal + RowMatrix(rng.normal_matrix(n, k)) * jitter_std.asDiagonal();
    x = zx * map_x.transpose();
    y = zy * map_y.transpose();
    x.rowwise() += offset_x.transpose();
    y.rowwise() += offset_y.transpose();
    x += noise * rng.normal_matrix(n, map_x.rows());
    y += noise * rng.normal_matrix(n, map_y.rows());
  }
};

struct Encoded {
  RowMatrix z;
  RowMatrix e;
  Vector norms;
};

Encoded encode(const Matrix& w, const RowMatrix& input, bool normalize) {
  Encoded out;
  out.z = input * w.transpose();
  out.norms = out.z.rowwise().norm();
  if (normalize) {
    if ((out.norms.array() <= 0.0).any()) throw DegenerateError("simulate: zero-norm embedding");
    out.e = out.z.array().colwise() / out.norms.array();
  } else {
    out.e = out.z;
  }
  return out;
}

RowMatrix similarity(const RowMatrix& ex, const RowMatrix& ey, double tau, SimilarityHead head) {
  RowMatrix s = ex * ey.transpose();
  if (head == SimilarityHead::SquaredDistance) {
    const Vector nx = ex.rowwise().squaredNorm();
    const Vector ny = ey.rowwise().squaredNorm();
    s = 2.0 * s;
    s.colwise() -= nx;
    s.rowwise() -= ny.transpose();
  }
  return s / tau;
}

RowMatrix row_softmax(const RowMatrix& s, Vector& lse) {
  lse.resize(s.rows());
  RowMatrix p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double top = s.row(i).maxCoeff();
    p.row(i) = (s.row(i).array() - top).exp();
    const double z = p.row(i).sum();
    lse[i] = top + std::log(z);
    p.row(i) /= z;
  }
  return p;
}

struct LossGrad {
  double loss = 0.0;
  RowMatrix d_ex;
  RowMatrix d_ey;
};

/// Symmetric InfoNCE averaged over the batch, with embedding-level gradients.
LossGrad contrastive_loss(const RowMatrix& ex, const RowMatrix& ey, double tau, SimilarityHead head) {
  const Eigen::Index b = ex.rows();
  const RowMatrix s = similarity(ex, ey, tau, head);
  Vector lse_row, lse_col;
  const RowMatrix p = row_softmax(s, lse_row);
  const RowMatrix qt = row_softmax(s.transpose(), lse_col);  // column softmax, transposed
  LossGrad out;
  out.loss = 0.5 * ((lse_row - s.diagonal()).mean() + (lse_col - s.diagonal()).mean());

  RowMatrix g = 0.5 / static_cast<double>(b) * (p + qt.transpose());
  g.diagonal().array() -= 1.0 / static_cast<double>(b);
  if (head == SimilarityHead::DotProduct) {
    out.d_ex = g * ey / tau;
    out.d_ey = g.transpose() * ex / tau;
  } else {
    const Vector row_sum = g.rowwise().sum();
    const Vector col_sum = g.colwise().sum().transpose();
    out.d_ex = (2.0 / tau) * (g * ey - RowMatrix(ex.array().colwise() * row_sum.array()));
    out.d_ey = (2.0 / tau) * (g.transpose() * ex - RowMatrix(ey.array().colwise() * col_sum.array()));
  }
  return out;
}

/// Gradient with respect to the pre-normalization output z.
RowMatrix backprop_normalization(const Encoded& enc, const RowMatrix& d_e, bool normalize) {
  if (!normalize) return d_e;
  const Vector radial = (d_e.array() * enc.e.array()).rowwise().sum();
  RowMatrix d_z = d_e - RowMatrix(enc.e.array().colwise() * radial.array());
  return d_z.array().colwise() / enc.norms.array();
}

/// Per-anchor gradients d L_i / d e_{x,i} of the x->y loss over chunks.
RowMatrix anchor_gradients(const RowMatrix& ex, const RowMatrix& ey, double tau, SimilarityHead head,
                           Eigen::Index chunk, double& mean_loss) {
  const Eigen::Index n = ex.rows();
  RowMatrix grads(n, ex.cols());
  double loss_sum = 0.0;
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index m = std::min(chunk, n - start);
    const RowMatrix cx = ex.middleRows(start, m);
    const RowMatrix cy = ey.middleRows(start, m);
    const RowMatrix s = similarity(cx, cy, tau, head);
    Vector lse;
    const RowMatrix p = row_softmax(s, lse);
    loss_sum += (lse - s.diagonal()).sum();
    const double factor = head == SimilarityHead::DotProduct ? 1.0 / tau : 2.0 / tau;
    grads.middleRows(start, m) = factor * (p * cy - cy);
  }
  mean_loss = loss_sum / static_cast<double>(n);
  return grads;
}

double safe_condition(const Matrix& sigma) {
  if (sigma.size() == 0) return 1.0;
  return condition_number(sym_eig(sigma).eigenvalues);
}

}  // namespace

TrainingTrace run_toy_training(const SimulationConfig& c) {
  check_config(c);
  const World world(c);
  const int t0 = c.resolved_t0();

  Rng probe_rng(c.data_seed ^ 0x5eedULL);
  RowMatrix probe_x, probe_y;
  world.sample(probe_rng, c.probe_size, probe_x, probe_y);

  Matrix w_x = Rng(c.init_seed_x).normal_matrix(c.embed_dim, c.input_dim) / std::sqrt(static_cast<double>(c.input_dim));
  Matrix w_y = c.shared_encoder
                   ? w_x
                   : Matrix(Rng(c.init_seed_y).normal_matrix(c.embed_dim, c.input_dim) /
                            std::sqrt(static_cast<double>(c.input_dim)));
  Rng batch_rng(c.batch_seed);

  TrainingTrace trace;
  trace.t0 = t0;
  ReferenceFrame frame;
  Matrix basis_v;
  Vector gamma0, gamma_prev;

  auto log_step = [&](int step) {
    const Encoded ex = encode(w_x, probe_x, c.normalize_output);
    const Encoded ey = encode(w_y, probe_y, c.normalize_output);
    const Matrix cov_sum = sample_covariance(ex.e) + sample_covariance(ey.e);
    if (step == t0) {
      frame = build_frame(cov_sum, c.energy, t0);
      basis_v = complement_basis(frame);
      trace.rank = static_cast<int>(frame.rank());
    }
    TraceRow row;
    row.step = step;
    const Matrix basis_ut = top_eigenbasis(cov_sum, frame.rank());
    row.sin_theta = geometric_baseline(frame, basis_ut);

    const GapDecomposition gap = decompose_gap(EmbeddingSet(ex.e), EmbeddingSet(ey.e), frame);
    row.gap_norm = gap.mean_gap.norm();
    row.gamma_norm = gap.gamma.norm();
    if (step == t0) gamma0 = gap.gamma;
    if (gamma_prev.size() == 0) gamma_prev = gap.gamma;
    row.drift = cob_drift(gap.gamma, gamma0, c.drift_eps);
    const Flagged stab = cosine_stability(gap.gamma, gamma_prev);
    row.cosine_stability = stab.degenerate ? 0.0 : stab.value;
    gamma_prev = gap.gamma;

    const Matrix sigma_u = sample_covariance(gap.delta);
    row.kappa_u = safe_condition(sigma_u);
    const RowMatrix zeta_v = gap.zeta * basis_v;
    Matrix sigma_v_coords;
    if (basis_v.cols() > 0) {
      if (c.v_shape == NoiseShape::Tyler) {
        sigma_v_coords = tyler_shape(zeta_v, TylerOptions{1e-6, 200}).sigma_hat;
      } else {
        sigma_v_coords = sample_covariance(zeta_v);
      }
      row.kappa_v = safe_condition(sigma_v_coords);
      const Matrix sigma_v_ambient = basis_v * sample_covariance(zeta_v) * basis_v.transpose();
      row.gamma_noise_angle = row.gamma_norm > 0.0 ? gamma_noise_angle(gap.gamma, sigma_v_ambient) : 0.0;
      row.coupling_norm = estimate_coupling(gap.delta, zeta_v, c.ridge_lambda).spectral_norm;
    }

    const RowMatrix grads = anchor_gradients(ex.e, ey.e, c.temperature, c.head, c.batch_size, row.loss);
    if (c.probe_gradient == ProbeGradient::BatchMean) {
      const Vector g = column_mean(grads);
      row.leak_ref = g.norm() > 0.0 ? leakage_ratio(g, frame) : 0.0;
    } else {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < grads.rows(); ++i)
        acc += grads.row(i).norm() > 0.0 ? leakage_ratio(grads.row(i).transpose(), frame) : 0.0;
      row.leak_ref = acc / static_cast<double>(grads.rows());
    }
    const Matrix grad_cov_u = sample_covariance(grads * frame.basis_u);
    const Flagged rho = rho_align(sigma_u, grad_cov_u);
    row.rho_align = rho.degenerate ? 0.0 : rho.value;
    trace.rows.push_back(row);
  };

  RowMatrix bx, by;
  for (int step = 0; step <= c.steps; ++step) {
    if (step >= t0 && ((step - t0) % c.log_interval == 0 || step == c.steps)) log_step(step);
    if (step == c.steps) break;

    world.sample(batch_rng, c.batch_size, bx, by);
    const Encoded ex = encode(w_x, bx, c.normalize_output);
    const Encoded ey = encode(w_y, by, c.normalize_output);
    const LossGrad lg = contrastive_loss(ex.e, ey.e, c.temperature, c.head);
    if (!std::isfinite(lg.loss)) throw DegenerateError("simulate: loss diverged at step " + std::to_string(step));
    const RowMatrix dz_x = backprop_normalization(ex, lg.d_ex, c.normalize_output);
    const RowMatrix dz_y = backprop_normalization(ey, lg.d_ey, c.normalize_output);
    const Matrix grad_wx = dz_x.transpose() * bx;
    const Matrix grad_wy = dz_y.transpose() * by;
    if (c.shared_encoder) {
      w_x -= c.learning_rate * (grad_wx + grad_wy);
      w_y = w_x;
    } else {
      w_x -= c.learning_rate * grad_wx;
      w_y -= c.learning_rate * grad_wy;
    }
    if (!w_x.allFinite() || !w_y.allFinite())
      throw DegenerateError("simulate: weights diverged at step " + std::to_string(step));
  }
  return trace;
}

void write_trace_csv(const TrainingTrace& trace, std::ostream& out) {
  out << "step,loss,sin_theta,leak_ref,gap_norm,gamma_norm,drift,cosine_stability,kappa_u,kappa_v,rho_align,"
         "gamma_noise_angle,coupling_norm\n";
  for (const auto& r : trace.rows) {
    out << r.step << ',' << format_double(r.loss) << ',' << format_double(r.sin_theta) << ','
        << format_double(r.leak_ref) << ',' << format_double(r.gap_norm) << ',' << format_double(r.gamma_norm) << ','
        << format_double(r.drift) << ',' << format_double(r.cosine_stability) << ',' << format_double(r.kappa_u)
        << ',' << format_double(r.kappa_v) << ',' << format_double(r.rho_align) << ','
        << format_double(r.gamma_noise_angle) << ',' << format_double(r.coupling_norm) << '\n';
  }
}

AblationReport gap_necessity_ablation(const SimulationConfig& config, int seeds) {
  if (seeds < 1) throw UsageError("ablation: need at least one seed");
  struct Spec {
    const char* name;
    void (*apply)(SimulationConfig&);
  };
  const Spec specs[] = {
      {"baseline", [](SimulationConfig&) {}},
      {"shared_encoder", [](SimulationConfig& c) { c.shared_encoder = true; }},
      {"no_normalization", [](SimulationConfig& c) { c.normalize_output = false; }},
      {"squared_distance_head", [](SimulationConfig& c) { c.head = SimilarityHead::SquaredDistance; }},
  };
  AblationReport report;
  report.seeds = seeds;
  for (const auto& spec : specs) {
    AblationVariant v;
    v.name = spec.name;
    for (int s = 0; s < seeds; ++s) {
      SimulationConfig c = config;
      spec.apply(c);
      const auto offset = static_cast<std::uint64_t>(s) * 1000;
      c.init_seed_x += offset;
      c.init_seed_y += offset;
      c.batch_seed += offset;
      try {
        const TrainingTrace t = run_toy_training(c);
        v.terminal_gamma.push_back(t.rows.back().gamma_norm);
        v.terminal_gap.push_back(t.rows.back().gap_norm);
      } catch (const DegenerateError& e) {
        v.error = e.what();
        break;
      }
    }
    if (!v.terminal_gamma.empty()) {
      for (double g : v.terminal_gamma) v.mean_gamma += g;
      for (double g : v.terminal_gap) v.mean_gap += g;
      v.mean_gamma /= static_cast<double>(v.terminal_gamma.size());
      v.mean_gap /= static_cast<double>(v.terminal_gap.size());
    }
    report.variants.push_back(std::move(v));
  }
  return report;
}

}  // namespace gapkit
