#include "disent/vae.hpp"

#include <cmath>
#include <string>

#include "disent/errors.hpp"

namespace disent {
namespace {

constexpr std::uint64_t kEncoderInitStream = 0x454e43;  // "ENC"
constexpr std::uint64_t kDecoderInitStream = 0x444543;  // "DEC"

int conv_stages(int image_size) {
  int stages = 0;
  for (int s = image_size; s > 4; s /= 2) ++stages;
  return stages;
}

}  // namespace

void ModelConfig::validate() const {
  if (image_size != 32 && image_size != 64) throw ConfigError("model image_size must be 32 or 64");
  if (latent_dim < 2) throw ConfigError("latent_dim must be >= 2");
  if (!(activation_slope > 0.0 && activation_slope < 1.0))
    throw ConfigError("activation_slope must lie in (0, 1)");
  if (fc_width < 1) throw ConfigError("fc_width must be positive");
  if (!conv_widths.empty() && static_cast<int>(conv_widths.size()) != conv_stages(image_size))
    throw ConfigError("conv_widths needs " + std::to_string(conv_stages(image_size)) +
                      " entries at image_size " + std::to_string(image_size));
  for (int w : conv_widths)
    if (w < 1) throw ConfigError("conv widths must be positive");
}

std::vector<int> ModelConfig::resolved_conv_widths() const {
  if (!conv_widths.empty()) return conv_widths;
  if (image_size == 64) return {32, 32, 64, 64};
  return {32, 32, 64};
}

MatrixF pack_images(std::span<const Observation> batch) {
  if (batch.empty()) throw DomainError("empty observation batch");
  const auto pixels = batch.front().pixels.size();
  MatrixF out(batch.size(), pixels);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].pixels.size() != pixels) throw DomainError("observations differ in size");
    std::copy(batch[i].pixels.begin(), batch[i].pixels.end(), out.row(i).begin());
  }
  return out;
}

VaeModel::VaeModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  const auto widths = config_.resolved_conv_widths();
  const auto slope = static_cast<float>(config_.activation_slope);
  const auto d = static_cast<std::size_t>(config_.latent_dim);
  const auto fc = static_cast<std::size_t>(config_.fc_width);
  const auto last = static_cast<std::size_t>(widths.back());
  const std::size_t flat = last * 4 * 4;

  Rng enc_init(stream_seed(init_seed, kEncoderInitStream));
  std::size_t cin = 1;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const auto cout = static_cast<std::size_t>(widths[i]);
    encoder_.add(std::make_unique<nn::Conv2d>(encoder_params_, "encoder.conv" + std::to_string(i),
                                              cin, cout, enc_init));
    encoder_.add(std::make_unique<nn::LeakyRelu>(slope));
    cin = cout;
  }
  encoder_.add(std::make_unique<nn::Flatten>());
  encoder_.add(std::make_unique<nn::Linear>(encoder_params_, "encoder.fc", flat, fc, enc_init));
  encoder_.add(std::make_unique<nn::LeakyRelu>(slope));
  auto head = std::make_unique<nn::Linear>(encoder_params_, "encoder.head", fc, 2 * d, enc_init);
  encoder_head_weight_ = head->weight_index();
  encoder_.add(std::move(head));

  Rng dec_init(stream_seed(init_seed, kDecoderInitStream));
  decoder_.add(std::make_unique<nn::Linear>(decoder_params_, "decoder.fc0", d, fc, dec_init));
  decoder_.add(std::make_unique<nn::LeakyRelu>(slope));
  decoder_.add(std::make_unique<nn::Linear>(decoder_params_, "decoder.fc1", fc, flat, dec_init));
  decoder_.add(std::make_unique<nn::LeakyRelu>(slope));
  decoder_.add(std::make_unique<nn::Unflatten>(last, 4, 4));
  for (std::size_t i = widths.size(); i-- > 1;) {
    decoder_.add(std::make_unique<nn::ConvTranspose2d>(
        decoder_params_, "decoder.deconv" + std::to_string(widths.size() - 1 - i),
        static_cast<std::size_t>(widths[i]), static_cast<std::size_t>(widths[i - 1]), dec_init));
    decoder_.add(std::make_unique<nn::LeakyRelu>(slope));
  }
  decoder_out_weight_ = decoder_params_.size();
  decoder_.add(std::make_unique<nn::ConvTranspose2d>(decoder_params_, "decoder.output",
                                                     static_cast<std::size_t>(widths.front()), 1,
                                                     dec_init));
}

EncoderOutput VaeModel::encode(const MatrixF& images, nn::Tape* tape) const {
  if (images.rows == 0) throw DomainError("encode needs a non-empty batch");
  if (images.cols != pixels())
    throw DomainError("image has " + std::to_string(images.cols) + " pixels, model expects " +
                      std::to_string(pixels()));
  const auto side = static_cast<std::size_t>(config_.image_size);
  auto input = nn::Activation::image(1, images.rows, side, side);
  std::copy(images.data.begin(), images.data.end(), input.data.begin());
  nn::Tape local;
  nn::Tape& t = tape ? *tape : local;
  encoder_.forward(encoder_params_, std::move(input), t);

  const auto& out = t.output();
  const std::size_t d = latent_dim();
  EncoderOutput enc{MatrixD(images.rows, d), MatrixD(images.rows, d)};
  for (std::size_t i = 0; i < images.rows; ++i) {
    const float* row = out.data.data() + i * 2 * d;
    for (std::size_t j = 0; j < d; ++j) {
      enc.mu(i, j) = row[j];
      enc.logvar(i, j) = row[d + j];
    }
  }
  return enc;
}

EncoderOutput VaeModel::encode(std::span<const Observation> batch) const {
  return encode(pack_images(batch));
}

MatrixD VaeModel::decode(const LatentBatch& latents, nn::Tape* tape) const {
  const auto& z = latents.z;
  if (z.cols != latent_dim())
    throw DomainError("latent width " + std::to_string(z.cols) + " differs from model width " +
                      std::to_string(latent_dim()));
  auto input = nn::Activation::flat(z.rows, z.cols);
  for (std::size_t i = 0; i < z.data.size(); ++i) input.data[i] = static_cast<float>(z.data[i]);
  nn::Tape local;
  nn::Tape& t = tape ? *tape : local;
  decoder_.forward(decoder_params_, std::move(input), t);
  const auto& out = t.output();
  MatrixD logits(z.rows, pixels());
  for (std::size_t i = 0; i < out.data.size(); ++i) logits.data[i] = out.data[i];
  return logits;
}

void VaeModel::encoder_backward(const nn::Tape& tape, const EncoderGrad& grad,
                                nn::ParameterSet& grads) const {
  const std::size_t n = grad.dmu.rows, d = latent_dim();
  auto dout = nn::Activation::flat(n, 2 * d);
  for (std::size_t i = 0; i < n; ++i) {
    float* row = dout.data.data() + i * 2 * d;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = static_cast<float>(grad.dmu(i, j));
      row[d + j] = static_cast<float>(grad.dlogvar(i, j));
    }
  }
  encoder_.backward(encoder_params_, tape, std::move(dout), grads);
}

MatrixD VaeModel::decoder_backward(const nn::Tape& tape, const MatrixD& dlogits,
                                   nn::ParameterSet& grads) const {
  const std::size_t n = dlogits.rows;
  const auto side = static_cast<std::size_t>(config_.image_size);
  auto dout = nn::Activation::image(1, n, side, side);
  for (std::size_t i = 0; i < dlogits.data.size(); ++i)
    dout.data[i] = static_cast<float>(dlogits.data[i]);
  nn::Activation dz_act;
  decoder_.backward(decoder_params_, tape, std::move(dout), grads, &dz_act);
  MatrixD dz(n, latent_dim());
  for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] = dz_act.data[i];
  return dz;
}

void VaeModel::zero_encoder_head() {
  for (std::size_t i = encoder_head_weight_; i < encoder_head_weight_ + 2; ++i)
    std::fill(encoder_params_[i].values.begin(), encoder_params_[i].values.end(), 0.0f);
}

void VaeModel::zero_decoder_output() {
  for (std::size_t i = decoder_out_weight_; i < decoder_out_weight_ + 2; ++i)
    std::fill(decoder_params_[i].values.begin(), decoder_params_[i].values.end(), 0.0f);
}

LatentBatch reparameterize(const EncoderOutput& enc, const MatrixD& eps) {
  if (eps.rows != enc.mu.rows || eps.cols != enc.mu.cols)
    throw DomainError("eps shape differs from the posterior parameters");
  LatentBatch out{MatrixD(eps.rows, eps.cols)};
  for (std::size_t i = 0; i < eps.data.size(); ++i)
    out.z.data[i] = enc.mu.data[i] + std::exp(0.5 * enc.logvar.data[i]) * eps.data[i];
  return out;
}

double reconstruction_loss(const MatrixD& logits, const MatrixF& x, MatrixD* dlogits) {
  if (logits.rows != x.rows || logits.cols != x.cols)
    throw DomainError("logits and targets differ in shape");
  if (x.rows == 0) throw DomainError("empty reconstruction batch");
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  if (dlogits) *dlogits = MatrixD(x.rows, x.cols);
  double total = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double target = x.data[i];
    if (!(target >= 0.0 && target <= 1.0))
      throw DomainError("target pixel outside [0, 1]");
    const double l = logits.data[i];
    total += std::max(l, 0.0) - l * target + std::log1p(std::exp(-std::abs(l)));
    if (dlogits) {
      const double prob = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
      dlogits->data[i] = (prob - target) * inv_n;
    }
  }
  return total * inv_n;
}

double kl_to_prior(const EncoderOutput& enc, EncoderGrad* grad, double scale) {
  const std::size_t n = enc.mu.rows;
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < enc.mu.data.size(); ++i) {
    const double mu = enc.mu.data[i];
    const double lv = enc.logvar.data[i];
    total += 0.5 * (mu * mu + (std::expm1(lv) - lv));
    if (grad) {
      grad->dmu.data[i] += scale * mu * inv_n;
      grad->dlogvar.data[i] += scale * 0.5 * std::expm1(lv) * inv_n;
    }
  }
  return total * inv_n;
}

}  // namespace disent
