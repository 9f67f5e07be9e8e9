#include "disent/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "disent/errors.hpp"

namespace disent {
namespace {

constexpr std::uint64_t kDiscInitStream = 0x44495343;  // "DISC"

double log_sum_exp2(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void require_two_logits(const MatrixD& logits) {
  if (logits.cols != 2 || logits.rows == 0)
    throw DomainError("discriminator logits must be a non-empty n x 2 matrix");
}

}  // namespace

std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::beta: return "beta";
    case RegularizerKind::annealed: return "annealed";
    case RegularizerKind::factor: return "factor";
    case RegularizerKind::dip_i: return "dip_i";
    case RegularizerKind::dip_ii: return "dip_ii";
    case RegularizerKind::btc: return "btc";
  }
  return "beta";
}

RegularizerKind parse_regularizer_kind(std::string_view text) {
  for (auto kind : {RegularizerKind::beta, RegularizerKind::annealed, RegularizerKind::factor,
                    RegularizerKind::dip_i, RegularizerKind::dip_ii, RegularizerKind::btc})
    if (to_string(kind) == text) return kind;
  throw ConfigError("unknown regularizer kind '" + std::string(text) + "'");
}

RegularizerConfig RegularizerConfig::defaults_for(RegularizerKind kind) {
  RegularizerConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case RegularizerKind::beta:
      cfg.beta = 4.0;
      break;
    case RegularizerKind::annealed:
      cfg.gamma = 1000.0;
      cfg.c_max = 25.0;
      break;
    case RegularizerKind::factor:
      cfg.gamma = 20.0;
      break;
    case RegularizerKind::dip_i:
      cfg.lambda_od = 10.0;
      cfg.lambda_d = 100.0;
      break;
    case RegularizerKind::dip_ii:
      cfg.lambda_od = 10.0;
      cfg.lambda_d = 10.0;
      break;
    case RegularizerKind::btc:
      cfg.beta = 6.0;
      break;
  }
  return cfg;
}

void RegularizerConfig::validate() const {
  if (beta < 0 || gamma < 0 || c_max < 0 || lambda_od < 0 || lambda_d < 0)
    throw ConfigError("regularizer hyper-parameters must be non-negative");
  if (kind == RegularizerKind::annealed && anneal_steps <= 0)
    throw ConfigError("anneal_steps must be positive");
}

void DiscriminatorConfig::validate() const {
  if (num_layers < 2) throw ConfigError("discriminator needs at least 2 layers");
  if (hidden_width < 1) throw ConfigError("discriminator hidden_width must be positive");
  if (!(learning_rate > 0)) throw ConfigError("discriminator learning rate must be positive");
}

double capacity_at(long step, double c_max, long anneal_steps) {
  if (anneal_steps <= 0) throw ConfigError("anneal_steps must be positive");
  if (step < 0) throw DomainError("negative step");
  return c_max * std::min(1.0, static_cast<double>(step) / static_cast<double>(anneal_steps));
}

double annealed_reg(double kl, double gamma, double capacity, double* dkl) {
  const double diff = kl - capacity;
  if (dkl) *dkl = diff > 0 ? gamma : (diff < 0 ? -gamma : 0.0);
  return gamma * std::abs(diff);
}

LatentBatch permute_dims(const LatentBatch& latents, Rng& rng) {
  const auto& z = latents.z;
  LatentBatch out{MatrixD(z.rows, z.cols)};
  std::vector<std::size_t> order(z.rows);
  for (std::size_t j = 0; j < z.cols; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    for (std::size_t i = 0; i < z.rows; ++i) out.z(i, j) = z(order[i], j);
  }
  return out;
}

double tc_estimate(const MatrixD& logits, MatrixD* dlogits, double scale) {
  require_two_logits(logits);
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    total += logits(i, 0) - logits(i, 1);
    if (dlogits) {
      (*dlogits)(i, 0) += scale * inv_n;
      (*dlogits)(i, 1) -= scale * inv_n;
    }
  }
  return total * inv_n;
}

double discriminator_loss(const MatrixD& logits_real, const MatrixD& logits_perm, MatrixD* dreal,
                          MatrixD* dperm) {
  require_two_logits(logits_real);
  require_two_logits(logits_perm);
  auto side = [](const MatrixD& logits, std::size_t target, MatrixD* grad) {
    const double inv_n = 1.0 / static_cast<double>(logits.rows);
    double total = 0.0;
    if (grad) *grad = MatrixD(logits.rows, 2);
    for (std::size_t i = 0; i < logits.rows; ++i) {
      const double lse = log_sum_exp2(logits(i, 0), logits(i, 1));
      total += lse - logits(i, target);
      if (grad) {
        for (std::size_t c = 0; c < 2; ++c) {
          const double p = std::exp(logits(i, c) - lse);
          (*grad)(i, c) = 0.5 * inv_n * (p - (c == target ? 1.0 : 0.0));
        }
      }
    }
    return total * inv_n;
  };
  return 0.5 * (side(logits_real, 0, dreal) + side(logits_perm, 1, dperm));
}

CovarianceMatrix latent_covariance(const MatrixD& samples) {
  const std::size_t n = samples.rows, d = samples.cols;
  if (n < 2) throw DomainError("covariance needs at least 2 samples");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += samples(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  CovarianceMatrix out{MatrixD(d, d)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double da = samples(i, a) - mean[a];
      for (std::size_t b = a; b < d; ++b) out.cov(a, b) += da * (samples(i, b) - mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      out.cov(a, b) /= static_cast<double>(n);
      out.cov(b, a) = out.cov(a, b);
    }
  return out;
}

void latent_covariance_backward(const MatrixD& samples, const MatrixD& dcov, MatrixD& dsamples) {
  const std::size_t n = samples.rows, d = samples.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += samples(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      double g = 0.0;
      for (std::size_t b = 0; b < d; ++b)
        g += (dcov(a, b) + dcov(b, a)) * (samples(i, b) - mean[b]);
      dsamples(i, a) += inv_n * g;
    }
}

double dip_penalty(const CovarianceMatrix& cov, double lambda_od, double lambda_d, MatrixD* dcov) {
  const auto& c = cov.cov;
  if (c.rows != c.cols) throw DomainError("covariance must be square");
  if (dcov) *dcov = MatrixD(c.rows, c.cols);
  double off = 0.0, diag = 0.0;
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) {
      if (i == j) {
        const double e = c(i, i) - 1.0;
        diag += e * e;
        if (dcov) (*dcov)(i, i) = 2.0 * lambda_d * e;
      } else {
        off += c(i, j) * c(i, j);
        if (dcov) (*dcov)(i, j) = 2.0 * lambda_od * c(i, j);
      }
    }
  return lambda_od * off + lambda_d * diag;
}

double total_correlation_mws(const EncoderOutput& enc, const LatentBatch& latents,
                             std::uint64_t dataset_size, EncoderGrad* grad, MatrixD* dz,
                             double scale) {
  const auto& z = latents.z;
  const std::size_t n = z.rows, d = z.cols;
  if (n < 2) throw DomainError("total correlation estimate needs at least 2 samples");
  if (dataset_size < n) throw DomainError("dataset_size smaller than the batch");
  if (enc.mu.rows != n || enc.mu.cols != d) throw DomainError("posterior/latent shape mismatch");

  const double log_norm = std::log(static_cast<double>(n) * static_cast<double>(dataset_size));
  constexpr double kLog2Pi = 1.8378770664093453;  // ln(2 pi)

  // log q(z_ik | x_j) for all i, j, k.
  std::vector<double> log_density(n * n * d);
  auto at = [&](std::size_t i, std::size_t j, std::size_t k) -> double& {
    return log_density[(i * n + j) * d + k];
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = z(i, k) - enc.mu(j, k);
        at(i, j, k) = -0.5 * (kLog2Pi + enc.logvar(j, k) + diff * diff * std::exp(-enc.logvar(j, k)));
      }

  const bool want_grad = grad != nullptr || dz != nullptr;
  std::vector<double> joint(n), joint_weights(n), marg(n), marg_weights(n * d);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // log q(z_i): logsumexp over j of the summed per-dimension densities.
    double jmax = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += at(i, j, k);
      joint[j] = s;
      jmax = std::max(jmax, s);
    }
    double jsum = 0.0;
    for (std::size_t j = 0; j < n; ++j) jsum += std::exp(joint[j] - jmax);
    const double log_qz = jmax + std::log(jsum);
    if (want_grad)
      for (std::size_t j = 0; j < n; ++j) joint_weights[j] = std::exp(joint[j] - log_qz);

    double log_qz_product = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double kmax = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) kmax = std::max(kmax, at(i, j, k));
      double ksum = 0.0;
      for (std::size_t j = 0; j < n; ++j) ksum += std::exp(at(i, j, k) - kmax);
      const double lse = kmax + std::log(ksum);
      log_qz_product += lse;
      if (want_grad)
        for (std::size_t j = 0; j < n; ++j) marg_weights[j * d + k] = std::exp(at(i, j, k) - lse);
    }
    total += (log_qz - log_norm) - (log_qz_product - static_cast<double>(d) * log_norm);

    if (want_grad) {
      const double w = scale / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < d; ++k) {
          const double g = w * (joint_weights[j] - marg_weights[j * d + k]);  // d TC / d L_ijk
          if (g == 0.0) continue;
          const double inv_var = std::exp(-enc.logvar(j, k));
          const double diff = z(i, k) - enc.mu(j, k);
          if (dz) (*dz)(i, k) += g * (-diff * inv_var);
          if (grad) {
            grad->dmu(j, k) += g * diff * inv_var;
            grad->dlogvar(j, k) += g * (-0.5 + 0.5 * diff * diff * inv_var);
          }
        }
    }
  }
  return total / static_cast<double>(n);
}

double btc_reg(const EncoderOutput& enc, const LatentBatch& latents, double beta,
               std::uint64_t dataset_size, EncoderGrad* grad, MatrixD* dz) {
  const double kl = kl_to_prior(enc, grad, 1.0);
  const double tc = total_correlation_mws(enc, latents, dataset_size, grad, dz, beta - 1.0);
  return kl + (beta - 1.0) * tc;
}

Discriminator::Discriminator(const DiscriminatorConfig& config, std::size_t latent_dim,
                             std::uint64_t init_seed)
    : config_(config), latent_dim_(latent_dim) {
  config_.validate();
  Rng init(stream_seed(init_seed, kDiscInitStream));
  const auto width = static_cast<std::size_t>(config_.hidden_width);
  std::size_t in = latent_dim;
  for (int layer = 0; layer + 1 < config_.num_layers; ++layer) {
    net_.add(std::make_unique<nn::Linear>(params_, "disc.fc" + std::to_string(layer), in, width,
                                          init));
    net_.add(std::make_unique<nn::LeakyRelu>(0.2f));
    in = width;
  }
  net_.add(std::make_unique<nn::Linear>(params_, "disc.out", in, 2, init));
}

MatrixD Discriminator::logits(const MatrixD& z, nn::Tape* tape) const {
  if (z.cols != latent_dim_) throw DomainError("discriminator input width mismatch");
  auto input = nn::Activation::flat(z.rows, z.cols);
  for (std::size_t i = 0; i < z.data.size(); ++i) input.data[i] = static_cast<float>(z.data[i]);
  nn::Tape local;
  nn::Tape& t = tape ? *tape : local;
  net_.forward(params_, std::move(input), t);
  MatrixD out(z.rows, 2);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = t.output().data[i];
  return out;
}

MatrixD Discriminator::backward(const nn::Tape& tape, const MatrixD& dlogits,
                                nn::ParameterSet& grads) const {
  auto dout = nn::Activation::flat(dlogits.rows, 2);
  for (std::size_t i = 0; i < dlogits.data.size(); ++i)
    dout.data[i] = static_cast<float>(dlogits.data[i]);
  nn::Activation dinput;
  net_.backward(params_, tape, std::move(dout), grads, &dinput);
  MatrixD dz(dlogits.rows, latent_dim_);
  for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] = dinput.data[i];
  return dz;
}

}  // namespace disent
