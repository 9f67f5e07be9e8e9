#pragma once

// Regularisation terms added to the reconstruction loss by each VAE
// variant, and the permuted-batch discriminator used to estimate total
// correlation for FactorVAE.
//
// Functions taking an optional gradient pointer accumulate
// scale * d(value)/d(input) into it.

#include <cstdint>
#include <string>
#include <string_view>

#include "disent/matrix.hpp"
#include "disent/nn.hpp"
#include "disent/rng.hpp"
#include "disent/vae.hpp"

namespace disent {

enum class RegularizerKind { beta, annealed, factor, dip_i, dip_ii, btc };

std::string_view to_string(RegularizerKind kind);
/// Parses the exact config strings; throws ConfigError otherwise.
RegularizerKind parse_regularizer_kind(std::string_view text);

struct RegularizerConfig {
  RegularizerKind kind = RegularizerKind::beta;
  double beta = 4.0;
  double gamma = 0.0;
  double c_max = 0.0;
  long anneal_steps = 20000;
  double lambda_od = 0.0;
  double lambda_d = 0.0;

  /// Literature defaults for each kind.
  static RegularizerConfig defaults_for(RegularizerKind kind);
  void validate() const;
  friend bool operator==(const RegularizerConfig&, const RegularizerConfig&) = default;
};

struct DiscriminatorConfig {
  int hidden_width = 1000;
  int num_layers = 6;
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;

  void validate() const;
  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

struct CovarianceMatrix {
  MatrixD cov;
};

inline double beta_reg(double kl, double beta) { return beta * kl; }

/// Linear capacity schedule c_max * min(1, t / anneal_steps).
double capacity_at(long step, double c_max, long anneal_steps);

/// gamma * |kl - capacity|. d(value)/d(kl) is written to `dkl` when given.
double annealed_reg(double kl, double gamma, double capacity, double* dkl = nullptr);

/// Shuffles every column independently across the batch.
LatentBatch permute_dims(const LatentBatch& latents, Rng& rng);

/// Density-ratio estimate mean(logit_joint - logit_factored) over rows of n x 2 logits.
double tc_estimate(const MatrixD& logits, MatrixD* dlogits = nullptr, double scale = 1.0);

inline double factor_vae_reg(double kl, double gamma, double tc) { return kl + gamma * tc; }

/// Two-class cross-entropy averaged over both batches: class 0 = joint
/// samples, class 1 = permuted samples.
double discriminator_loss(const MatrixD& logits_real, const MatrixD& logits_perm,
                          MatrixD* dreal = nullptr, MatrixD* dperm = nullptr);

/// Population covariance E[s s^T] - E[s] E[s]^T of the rows of `samples`.
CovarianceMatrix latent_covariance(const MatrixD& samples);
/// Adds d(loss)/d(samples) given d(loss)/d(cov).
void latent_covariance_backward(const MatrixD& samples, const MatrixD& dcov, MatrixD& dsamples);

/// lambda_od * sum_{i != j} C_ij^2 + lambda_d * sum_i (C_ii - 1)^2.
double dip_penalty(const CovarianceMatrix& cov, double lambda_od, double lambda_d,
                   MatrixD* dcov = nullptr);

/// Minibatch-weighted-sampling estimate of TC = E[log q(z) - sum_j log q(z_j)].
/// Gradients with respect to mu, logvar and z are added when the pointers are set.
double total_correlation_mws(const EncoderOutput& enc, const LatentBatch& latents,
                             std::uint64_t dataset_size, EncoderGrad* grad = nullptr,
                             MatrixD* dz = nullptr, double scale = 1.0);

/// beta-TCVAE term: kl_to_prior + (beta - 1) * TC, so only the total
/// correlation part of the KL decomposition is up-weighted.
double btc_reg(const EncoderOutput& enc, const LatentBatch& latents, double beta,
               std::uint64_t dataset_size, EncoderGrad* grad = nullptr, MatrixD* dz = nullptr);

/// MLP critic: latent_dim -> hidden x (num_layers - 1) -> 2 logits.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, std::size_t latent_dim,
                std::uint64_t init_seed);

  const DiscriminatorConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  MatrixD logits(const MatrixD& z, nn::Tape* tape = nullptr) const;
  /// Accumulates parameter gradients into `grads`; returns d(loss)/dz.
  MatrixD backward(const nn::Tape& tape, const MatrixD& dlogits, nn::ParameterSet& grads) const;

 private:
  DiscriminatorConfig config_;
  std::size_t latent_dim_;
  nn::ParameterSet params_;
  nn::Sequential net_;
};

}  // namespace disent
