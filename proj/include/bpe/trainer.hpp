#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bpe/beta_bernoulli.hpp"
#include "bpe/code.hpp"
#include "bpe/likelihood.hpp"
#include "bpe/metrics.hpp"
#include "bpe/nn.hpp"
#include "bpe/pursuit.hpp"

namespace bpe {

struct ModelConfig {
  LikelihoodKind likelihood = LikelihoodKind::Gaussian;
  std::size_t K = 32;
  std::vector<std::size_t> hidden{64};
  std::size_t data_dim = 0;  // D, or W for Poisson; taken from the data when 0
  std::size_t topics = 15;   // T, Poisson only
  GaussianLikelihoodConfig gauss;
  double gamma_a = 1.0;
  double gamma_b = 1.0;
  double beta_init_scale = 0.01;
  std::size_t max_active = 0;  // 0 = no cap beyond K

  /// Width of the decoder output.
  std::size_t output_dim() const {
    return likelihood == LikelihoodKind::Poisson ? topics : data_dim;
  }
};

struct TrainConfig {
  ModelConfig model;
  BetaProcessConfig prior = BetaProcessConfig::with_defaults(32);
  AdamConfig adam;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t eval_every = 0;  // epochs between held-out evaluations; 0 disables
  bool early_stop = false;
  double early_stop_tol = 1e-5;
  std::size_t early_stop_window = 3;
  bool eval_include_prior = true;
  bool log_timing = true;  // false writes 0 into the phase_ms columns
  std::string checkpoint_path;
  std::string metrics_path;
  std::string config_text;  // recorded in checkpoints and the metrics CSV preamble

  void validate(std::size_t N) const;
};

/// Everything that evolves during training.
struct TrainState {
  DecoderNetwork net;
  AdamState adam;
  BetaPosterior pi;
  LikelihoodModel likelihood;
  MatrixAdamState beta_adam;  // Poisson topic logits
  std::vector<Code> codes;    // latest code of every training datum
  std::vector<Code> last_batch_codes;  // pursuit output of the previous step; empty before the first
  std::vector<std::optional<GammaScalePosterior>> gamma_table;  // Poisson, filled on first touch
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  std::uint64_t gamma_computations = 0;
};

/// Fresh state for N training data; the decoder is seeded from config.seed.
TrainState init_state(const TrainConfig& config, std::size_t N);

enum class Phase : std::uint8_t { Lambda, Pi, Codes, Theta };
const char* phase_name(Phase p);

struct StepMetrics {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::array<double, 4> phase_ms{};  // lambda, pi, z, theta
  double mean_bound = 0.0;
  double mean_active_bits = 0.0;
  double evals_per_datum = 0.0;
  double sparsity = 0.0;
  std::optional<double> heldout_metric;
  std::vector<Phase> phase_log;
  double eta = 0.0;
};

/// One pass of the four phases over a batch of training indices:
/// scale posteriors, q(pi) step, greedy pursuit, ADAM step on theta.
StepMetrics train_step(TrainState& state, const TrainConfig& config, const Eigen::MatrixXd& data,
                       const std::vector<std::size_t>& batch);

/// Batch order for an epoch: a shuffle seeded by (seed, epoch).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t N, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch);

struct TrainResult {
  TrainState state;
  std::vector<StepMetrics> steps;
  std::vector<double> epoch_mean_bound;
  bool stopped_early = false;
};

/// Runs epochs until config.epochs have completed (or the early-stop rule fires).
/// Continues from `resume` when given. Writes the metrics CSV and a checkpoint
/// per epoch when the corresponding paths are set.
TrainResult train(const TrainConfig& config, const Eigen::MatrixXd& data,
                  const Eigen::MatrixXd* heldout = nullptr,
                  std::optional<TrainState> resume = std::nullopt);

struct EncodedSet {
  std::vector<PursuitResult> results;
  std::vector<Code> codes;
  Eigen::VectorXd scale_means;  // E[lambda_n] under the chosen code (1 for Bernoulli)
};

/// Encodes data with frozen parameters.
EncodedSet encode_dataset(const TrainState& state, const TrainConfig& config,
                          const Eigen::MatrixXd& data, bool include_prior = true);

/// Held-out MSE (Gaussian) or NLL (Bernoulli, Poisson) plus code sparsity.
EvalReport evaluate(const TrainState& state, const TrainConfig& config,
                    const Eigen::MatrixXd& heldout);

/// CSV header of the per-step metrics log.
inline constexpr const char* kMetricsHeader =
    "step,epoch,phase_ms_lambda,phase_ms_pi,phase_ms_z,phase_ms_theta,mean_bound,"
    "mean_active_bits,evals_per_datum,heldout_metric,sparsity";

void write_metrics_row(std::ostream& os, const StepMetrics& m);

// Checkpoint: "BBPT" manifest (u32 version, u32 section count), then tagged
// sections (4-byte tag, u64 length, payload): CONF, LIKE, NETW, BETA, TOPC, CODE, LAST,
// GAMM, STAT.
void save_checkpoint(const std::string& path, const TrainState& state, const std::string& config_text);
void write_checkpoint(std::ostream& os, const TrainState& state, const std::string& config_text);

struct LoadedCheckpoint {
  TrainState state;
  std::string config_text;
};
LoadedCheckpoint load_checkpoint(const std::string& path);
LoadedCheckpoint read_checkpoint(std::istream& is);

/// 64-bit FNV-1a, hex encoded.
std::string fingerprint(const std::string& text);

}  // namespace bpe
