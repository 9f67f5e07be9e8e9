#pragma once

// Convolutional VAE: encoder q(z|x), decoder p(x|z) with Bernoulli pixels,
// the reparameterisation, and the two terms of the evidence lower bound.

#include <cstdint>
#include <span>
#include <vector>

#include "disent/dataset.hpp"
#include "disent/matrix.hpp"
#include "disent/representation.hpp"
#include "disent/nn.hpp"

namespace disent {

struct ModelConfig {
  int image_size = 32;
  int latent_dim = 10;
  double activation_slope = 0.2;
  /// Empty means the default for image_size: {32,32,64} at 32, {32,32,64,64} at 64.
  std::vector<int> conv_widths;
  int fc_width = 256;

  void validate() const;
  std::vector<int> resolved_conv_widths() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Posterior parameters, one row per input.
struct EncoderOutput {
  MatrixD mu;
  MatrixD logvar;
};

/// Gradients with respect to the posterior parameters.
struct EncoderGrad {
  MatrixD dmu;
  MatrixD dlogvar;

  static EncoderGrad zeros(std::size_t n, std::size_t d) {
    return {MatrixD(n, d), MatrixD(n, d)};
  }
};

struct LatentBatch {
  MatrixD z;
};

/// Packs observations as rows of an n x (H*W) matrix.
MatrixF pack_images(std::span<const Observation> batch);

class VaeModel : public Encoder {
 public:
  VaeModel(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  std::size_t latent_dim() const override { return static_cast<std::size_t>(config_.latent_dim); }
  std::size_t pixels() const {
    return static_cast<std::size_t>(config_.image_size) * config_.image_size;
  }

  nn::ParameterSet& encoder_params() { return encoder_params_; }
  const nn::ParameterSet& encoder_params() const { return encoder_params_; }
  nn::ParameterSet& decoder_params() { return decoder_params_; }
  const nn::ParameterSet& decoder_params() const { return decoder_params_; }

  /// images: n x (H*W). The tape, when given, records activations for backward.
  EncoderOutput encode(const MatrixF& images, nn::Tape* tape = nullptr) const;
  EncoderOutput encode(std::span<const Observation> batch) const;
  /// Posterior means.
  MatrixD encode_mean(const MatrixF& images) const override { return encode(images).mu; }
  /// Per-pixel Bernoulli logits, n x (H*W).
  MatrixD decode(const LatentBatch& latents, nn::Tape* tape = nullptr) const;

  void encoder_backward(const nn::Tape& tape, const EncoderGrad& grad,
                        nn::ParameterSet& grads) const;
  /// Accumulates decoder gradients and returns d(loss)/dz.
  MatrixD decoder_backward(const nn::Tape& tape, const MatrixD& dlogits,
                           nn::ParameterSet& grads) const;

  /// Zeroes the weights and bias of the last encoder layer (mu and logvar heads).
  void zero_encoder_head();
  /// Zeroes the weights and bias of the last decoder layer.
  void zero_decoder_output();

 private:
  ModelConfig config_;
  nn::ParameterSet encoder_params_;
  nn::ParameterSet decoder_params_;
  nn::Sequential encoder_;
  nn::Sequential decoder_;
  std::size_t encoder_head_weight_ = 0;
  std::size_t decoder_out_weight_ = 0;
};

/// z = mu + exp(logvar / 2) * eps, elementwise.
LatentBatch reparameterize(const EncoderOutput& enc, const MatrixD& eps);

/// Negative Bernoulli log-likelihood summed over pixels, averaged over the
/// batch. Writes d(loss)/d(logits) when `dlogits` is non-null.
double reconstruction_loss(const MatrixD& logits, const MatrixF& x, MatrixD* dlogits = nullptr);

/// KL(q(z|x) || N(0, I)) summed over latent dims, averaged over the batch.
/// Adds scale * gradient into `grad` when non-null.
double kl_to_prior(const EncoderOutput& enc, EncoderGrad* grad = nullptr, double scale = 1.0);

inline double elbo_loss(double recon, double kl) { return recon + kl; }

}  // namespace disent
