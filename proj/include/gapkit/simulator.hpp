#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gapkit/types.hpp"

namespace gapkit {

enum class SimilarityHead { DotProduct, SquaredDistance };
enum class ProbeGradient { BatchMean, PerSample };
enum class NoiseShape { Sample, Tyler };

/// Toy dual-encoder run. Paired inputs come from a shared latent
/// z ~ N(0, diag(k^-decay)) plus per-modality jitter that grows toward the
/// last latent, mapped by per-modality linear maps plus a common offset, an
/// optional modality-specific offset and isotropic input noise. Each modality
/// has its own linear encoder followed by L2 normalization, trained with
/// symmetric InfoNCE by plain gradient descent.
struct SimulationConfig {
  int latent_dim = 6;
  int input_dim = 256;
  int embed_dim = 64;
  double latent_decay = 0.0;
  double input_noise = 0.08;
  double latent_noise = 0.2;  // per-modality jitter std of the last latent
  double jitter_decay = 6.0;  // jitter variance of latent k scales as (k/latent_dim)^jitter_decay
  double common_offset = 1.0;
  double modality_offset = 0.0;
  double map_perturbation = 0.1;

  int batch_size = 256;
  int steps = 2000;
  double temperature = 0.1;
  double learning_rate = 0.002;

  int probe_size = 2048;
  int log_interval = 20;
  int t0 = -1;  // -1: 40% of steps
  double energy = 0.9;
  double ridge_lambda = 1e-3;
  double drift_eps = 1e-8;

  std::uint64_t data_seed = 1;
  std::uint64_t init_seed_x = 2;
  std::uint64_t init_seed_y = 3;
  std::uint64_t batch_seed = 4;

  bool shared_encoder = false;
  bool normalize_output = true;
  SimilarityHead head = SimilarityHead::DotProduct;
  ProbeGradient probe_gradient = ProbeGradient::BatchMean;
  NoiseShape v_shape = NoiseShape::Sample;

  int resolved_t0() const { return t0 >= 0 ? t0 : (steps * 2) / 5; }
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys are
/// usage errors.
SimulationConfig parse_simulation_config(const std::string& text);
SimulationConfig load_simulation_config(const std::filesystem::path& path);
std::map<std::string, std::string> describe(const SimulationConfig& config);

struct TraceRow {
  int step = 0;
  double loss = 0.0;
  double sin_theta = 0.0;
  double leak_ref = 0.0;
  double gap_norm = 0.0;  // ||E[Delta]||
  double gamma_norm = 0.0;
  double drift = 0.0;
  double cosine_stability = 1.0;
  double kappa_u = 1.0;
  double kappa_v = 1.0;
  double rho_align = 0.0;
  double gamma_noise_angle = 0.0;
  double coupling_norm = 0.0;
};

struct TrainingTrace {
  int rank = 0;  // r of the frozen frame
  int t0 = 0;
  std::vector<TraceRow> rows;
};

/// Trains and logs geometric statistics every log_interval steps from t0 on
/// (the frame is frozen at t0). Throws DegenerateError naming the step if the
/// loss becomes non-finite.
TrainingTrace run_toy_training(const SimulationConfig& config);

void write_trace_csv(const TrainingTrace& trace, std::ostream& out);

struct AblationVariant {
  std::string name;
  std::vector<double> terminal_gamma;  // per seed
  std::vector<double> terminal_gap;
  double mean_gamma = 0.0;
  double mean_gap = 0.0;
  std::string error;  // non-empty when a run diverged
};

struct AblationReport {
  std::vector<AblationVariant> variants;  // baseline first
  int seeds = 0;
};

/// Baseline plus three ablations (shared encoder, no output normalization,
/// squared-distance head), each averaged over `seeds` seed offsets.
AblationReport gap_necessity_ablation(const SimulationConfig& config, int seeds = 5);

}  // namespace gapkit
