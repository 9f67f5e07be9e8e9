#pragma once

// Seeded stochastic-gradient training of the VAE variants.
//
// Every random draw of step t comes from a stream derived from
// (seed, purpose, t), so a run is a pure function of its config and a
// checkpoint needs only the step counter to resume exactly.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "disent/dataset.hpp"
#include "disent/regularizers.hpp"
#include "disent/representation.hpp"
#include "disent/vae.hpp"

namespace disent {

// Stream identifiers passed to stream_seed(seed, stream, step).
inline constexpr std::uint64_t kInitStream = 0x494e4954;   // "INIT"
inline constexpr std::uint64_t kDataStream = 0x44415441;   // "DATA"
inline constexpr std::uint64_t kNoiseStream = 0x4e4f4953;  // "NOIS"
inline constexpr std::uint64_t kDiscStream = 0x44534352;   // "DSCR"

struct TrainConfig {
  long steps = 20000;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  std::uint64_t seed = 0;
  ModelConfig model;
  RegularizerConfig regularizer;
  DiscriminatorConfig discriminator;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  nn::ParameterSet m;
  nn::ParameterSet v;
  long t = 0;

  static AdamState for_params(const nn::ParameterSet& params);
};

void adam_step(nn::ParameterSet& params, const nn::ParameterSet& grads, AdamState& state,
               const AdamConfig& config);

/// One logged training step.
struct StepRecord {
  long step = 0;
  double recon = 0;
  double kl = 0;
  double reg = 0;        // regularisation term; total loss = recon + reg
  double tc = 0;         // TC estimate (factor, btc) or covariance penalty (dip_*)
  double disc_loss = 0;  // NaN unless the discriminator was trained
  double total() const { return recon + reg; }
};

using LossTrace = std::vector<StepRecord>;

struct RunState {
  std::string run_id;
  TrainConfig config;
  long step = 0;
  VaeModel model;
  std::optional<Discriminator> discriminator;
  AdamState encoder_opt;
  AdamState decoder_opt;
  AdamState discriminator_opt;

  /// Freshly initialised state for `config` (step 0).
  static RunState initial(const TrainConfig& config, std::string run_id = "run");
};

struct TrainOptions {
  std::filesystem::path trace_csv;        // appended when non-empty
  std::filesystem::path checkpoint_path;  // written every checkpoint_every steps and at the end
  long checkpoint_every = 0;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  RunState state;
  LossTrace trace;
};

/// Runs config.steps updates from a fresh state.
TrainResult train(const GroundTruthDataset& dataset, const TrainConfig& config,
                  const TrainOptions& options = {});
/// Continues `state` until state.config.steps.
TrainResult resume(const GroundTruthDataset& dataset, RunState state,
                   const TrainOptions& options = {});

/// One update of the configured kind at state.step (non-factor kinds use vae_batch only).
StepRecord train_step(const GroundTruthDataset& dataset, RunState& state);

/// Alternating FactorVAE update: VAE on vae_batch with the TC penalty, then
/// the discriminator on z(disc_batch) against its dimension-permuted copy.
StepRecord factorvae_step(RunState& state, const MatrixF& vae_batch, const MatrixD& vae_eps,
                          const MatrixF& disc_batch, const MatrixD& disc_eps, Rng& permute_rng);

/// One discriminator update on a latent batch and its permutation. Returns the loss.
double discriminator_update(Discriminator& disc, AdamState& opt, const MatrixD& z,
                            Rng& permute_rng);

void save_checkpoint(const RunState& state, const std::filesystem::path& path);
RunState load_checkpoint(const std::filesystem::path& path);

/// Appends records to a CSV with header step,recon,kl,reg,tc,disc_loss.
void append_trace_csv(const std::filesystem::path& path, const LossTrace& records);
LossTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace disent
