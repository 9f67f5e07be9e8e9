#include "disent/training.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "disent/errors.hpp"
#include "disent/serialization.hpp"
#include "disent/simd/kernels.hpp"

namespace disent {
namespace {

constexpr char kCheckpointMagic[8] = {'D', 'I', 'S', 'E', 'N', 'T', 'C', 'K'};

MatrixF render_batch(const GroundTruthDataset& dataset, const std::vector<FactorTuple>& tuples) {
  MatrixF x(tuples.size(), dataset.pixels_per_image());
  for (std::size_t i = 0; i < tuples.size(); ++i) dataset.render_into(tuples[i], x.row(i));
  return x;
}

MatrixD standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  MatrixD eps(rows, cols);
  for (auto& v : eps.data) v = rng.normal();
  return eps;
}

bool uses_batch_statistics(RegularizerKind kind) {
  return kind == RegularizerKind::factor || kind == RegularizerKind::btc ||
         kind == RegularizerKind::dip_i || kind == RegularizerKind::dip_ii;
}

AdamConfig vae_adam(const TrainConfig& cfg) {
  return {cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
}

AdamConfig disc_adam(const DiscriminatorConfig& cfg) {
  return {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8};
}

void check_finite(long step, const StepRecord& rec) {
  auto bad = [](double v) { return !std::isfinite(v); };
  if (bad(rec.recon) || bad(rec.kl) || bad(rec.reg) || bad(rec.tc)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "recon=" << rec.recon << " kl=" << rec.kl << " reg=" << rec.reg << " tc=" << rec.tc;
    throw NonFiniteLoss(step, msg.str());
  }
}

// VAE half of a step: loss, gradients and parameter update. Does not advance the step counter.
StepRecord vae_update(RunState& state, const MatrixF& x, const MatrixD& eps,
                      std::uint64_t dataset_size) {
  const auto& cfg = state.config;
  const auto& reg_cfg = cfg.regularizer;
  auto& model = state.model;
  const std::size_t n = x.rows, d = model.latent_dim();

  nn::Tape enc_tape, dec_tape;
  const EncoderOutput enc = model.encode(x, &enc_tape);
  const LatentBatch lat = reparameterize(enc, eps);
  const MatrixD logits = model.decode(lat, &dec_tape);

  StepRecord rec;
  rec.step = state.step;
  rec.disc_loss = std::nan("");
  MatrixD dlogits;
  rec.recon = reconstruction_loss(logits, x, &dlogits);

  EncoderGrad grad = EncoderGrad::zeros(n, d);
  MatrixD dz_reg(n, d);
  switch (reg_cfg.kind) {
    case RegularizerKind::beta:
      rec.kl = kl_to_prior(enc, &grad, reg_cfg.beta);
      rec.reg = beta_reg(rec.kl, reg_cfg.beta);
      break;
    case RegularizerKind::annealed: {
      rec.kl = kl_to_prior(enc);
      const double capacity = capacity_at(state.step, reg_cfg.c_max, reg_cfg.anneal_steps);
      double dkl = 0.0;
      rec.reg = annealed_reg(rec.kl, reg_cfg.gamma, capacity, &dkl);
      if (dkl != 0.0) kl_to_prior(enc, &grad, dkl);
      break;
    }
    case RegularizerKind::factor: {
      rec.kl = kl_to_prior(enc, &grad, 1.0);
      auto& disc = *state.discriminator;
      nn::Tape disc_tape;
      const MatrixD disc_logits = disc.logits(lat.z, &disc_tape);
      MatrixD dlog(n, 2);
      rec.tc = tc_estimate(disc_logits, &dlog, reg_cfg.gamma);
      rec.reg = factor_vae_reg(rec.kl, reg_cfg.gamma, rec.tc);
      // The critic's own parameters are not updated here.
      auto unused = nn::zeros_like(disc.params());
      const MatrixD dz = disc.backward(disc_tape, dlog, unused);
      for (std::size_t i = 0; i < dz.data.size(); ++i) dz_reg.data[i] += dz.data[i];
      break;
    }
    case RegularizerKind::dip_i:
    case RegularizerKind::dip_ii: {
      rec.kl = kl_to_prior(enc, &grad, 1.0);
      const bool on_mean = reg_cfg.kind == RegularizerKind::dip_i;
      const MatrixD& samples = on_mean ? enc.mu : lat.z;
      MatrixD dcov;
      rec.tc = dip_penalty(latent_covariance(samples), reg_cfg.lambda_od, reg_cfg.lambda_d, &dcov);
      latent_covariance_backward(samples, dcov, on_mean ? grad.dmu : dz_reg);
      rec.reg = rec.kl + rec.tc;
      break;
    }
    case RegularizerKind::btc:
      rec.kl = kl_to_prior(enc, &grad, 1.0);
      rec.tc = total_correlation_mws(enc, lat, dataset_size, &grad, &dz_reg, reg_cfg.beta - 1.0);
      rec.reg = rec.kl + (reg_cfg.beta - 1.0) * rec.tc;
      break;
  }
  check_finite(state.step, rec);

  auto dec_grads = nn::zeros_like(model.decoder_params());
  const MatrixD dz = model.decoder_backward(dec_tape, dlogits, dec_grads);
  for (std::size_t i = 0; i < dz.data.size(); ++i) {
    const double g = dz.data[i] + dz_reg.data[i];
    grad.dmu.data[i] += g;
    grad.dlogvar.data[i] += g * 0.5 * std::exp(0.5 * enc.logvar.data[i]) * eps.data[i];
  }
  auto enc_grads = nn::zeros_like(model.encoder_params());
  model.encoder_backward(enc_tape, grad, enc_grads);

  const AdamConfig adam = vae_adam(cfg);
  adam_step(model.encoder_params(), enc_grads, state.encoder_opt, adam);
  adam_step(model.decoder_params(), dec_grads, state.decoder_opt, adam);
  return rec;
}

// ------------------------------------------------------------ checkpoint io

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(const std::string& bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

// Little-endian float32 bytes of a tensor.
std::string tensor_bytes(const std::vector<float>& values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

void tensor_from_bytes(const char* src, std::vector<float>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[i * 4 + b])) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
}

std::uint32_t crc_of(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded chunks.
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct NamedTensorRef {
  std::string name;
  nn::Tensor* tensor;
};

std::vector<NamedTensorRef> checkpoint_tensors(RunState& state) {
  std::vector<NamedTensorRef> refs;
  auto add_set = [&](const std::string& prefix, nn::ParameterSet& set) {
    for (auto& t : set) refs.push_back({prefix + t.name, &t});
  };
  add_set("params/", state.model.encoder_params());
  add_set("params/", state.model.decoder_params());
  add_set("adam_m/", state.encoder_opt.m);
  add_set("adam_v/", state.encoder_opt.v);
  add_set("adam_m/", state.decoder_opt.m);
  add_set("adam_v/", state.decoder_opt.v);
  if (state.discriminator) {
    add_set("params/", state.discriminator->params());
    add_set("adam_m/", state.discriminator_opt.m);
    add_set("adam_v/", state.discriminator_opt.v);
  }
  return refs;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (batch_size < 2 && uses_batch_statistics(regularizer.kind))
    throw ConfigError("batch_size must be >= 2 for regularizer kind '" +
                      std::string(to_string(regularizer.kind)) + "'");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  model.validate();
  regularizer.validate();
  if (regularizer.kind == RegularizerKind::factor) discriminator.validate();
}

AdamState AdamState::for_params(const nn::ParameterSet& params) {
  return {nn::zeros_like(params), nn::zeros_like(params), 0};
}

void adam_step(nn::ParameterSet& params, const nn::ParameterSet& grads, AdamState& state,
               const AdamConfig& config) {
  state.t += 1;
  const simd::AdamStep step{
      static_cast<float>(config.learning_rate),
      static_cast<float>(config.beta1),
      static_cast<float>(config.beta2),
      static_cast<float>(config.eps),
      static_cast<float>(1.0 - std::pow(config.beta1, static_cast<double>(state.t))),
      static_cast<float>(1.0 - std::pow(config.beta2, static_cast<double>(state.t)))};
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < params.size(); ++i)
    k.adam_update(params[i].values.data(), grads[i].values.data(), state.m[i].values.data(),
                  state.v[i].values.data(), params[i].size(), step);
}

RunState RunState::initial(const TrainConfig& config, std::string run_id) {
  config.validate();
  VaeModel model(config.model, stream_seed(config.seed, kInitStream));
  auto enc_opt = AdamState::for_params(model.encoder_params());
  auto dec_opt = AdamState::for_params(model.decoder_params());
  std::optional<Discriminator> disc;
  AdamState disc_opt;
  if (config.regularizer.kind == RegularizerKind::factor) {
    disc.emplace(config.discriminator, model.latent_dim(), stream_seed(config.seed, kInitStream));
    disc_opt = AdamState::for_params(disc->params());
  }
  return RunState{std::move(run_id), config,           0,
                  std::move(model),  std::move(disc),  std::move(enc_opt),
                  std::move(dec_opt), std::move(disc_opt)};
}

double discriminator_update(Discriminator& disc, AdamState& opt, const MatrixD& z,
                            Rng& permute_rng) {
  const LatentBatch permuted = permute_dims(LatentBatch{z}, permute_rng);
  nn::Tape real_tape, perm_tape;
  const MatrixD real_logits = disc.logits(z, &real_tape);
  const MatrixD perm_logits = disc.logits(permuted.z, &perm_tape);
  MatrixD dreal, dperm;
  const double loss = discriminator_loss(real_logits, perm_logits, &dreal, &dperm);
  auto grads = nn::zeros_like(disc.params());
  disc.backward(real_tape, dreal, grads);
  disc.backward(perm_tape, dperm, grads);
  adam_step(disc.params(), grads, opt, disc_adam(disc.config()));
  return loss;
}

StepRecord factorvae_step(RunState& state, const MatrixF& vae_batch, const MatrixD& vae_eps,
                          const MatrixF& disc_batch, const MatrixD& disc_eps, Rng& permute_rng) {
  if (!state.discriminator) throw ConfigError("factorvae_step needs a factor-kind run state");
  if (vae_batch.rows < 2 || disc_batch.rows < 2)
    throw ConfigError("FactorVAE batches need at least 2 rows");
  // The dataset size only matters for the btc estimator.
  StepRecord rec = vae_update(state, vae_batch, vae_eps, 0);
  const EncoderOutput enc = state.model.encode(disc_batch);
  const LatentBatch z = reparameterize(enc, disc_eps);
  rec.disc_loss = discriminator_update(*state.discriminator, state.discriminator_opt, z.z,
                                       permute_rng);
  if (!std::isfinite(rec.disc_loss))
    throw NonFiniteLoss(state.step, "discriminator loss is not finite");
  state.step += 1;
  return rec;
}

StepRecord train_step(const GroundTruthDataset& dataset, RunState& state) {
  const auto& cfg = state.config;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto d = state.model.latent_dim();
  const auto t = static_cast<std::uint64_t>(state.step);

  Rng data_rng(stream_seed(cfg.seed, kDataStream, t));
  const MatrixF x = render_batch(dataset, dataset.sample_factors(batch, data_rng));
  Rng noise_rng(stream_seed(cfg.seed, kNoiseStream, t));
  const MatrixD eps = standard_normal(batch, d, noise_rng);

  if (cfg.regularizer.kind == RegularizerKind::factor) {
    Rng disc_rng(stream_seed(cfg.seed, kDiscStream, t));
    const MatrixF x2 = render_batch(dataset, dataset.sample_factors(batch, disc_rng));
    const MatrixD eps2 = standard_normal(batch, d, disc_rng);
    return factorvae_step(state, x, eps, x2, eps2, disc_rng);
  }
  StepRecord rec = vae_update(state, x, eps, dataset.num_configurations());
  state.step += 1;
  return rec;
}

TrainResult resume(const GroundTruthDataset& dataset, RunState state, const TrainOptions& options) {
  if (dataset.image_size() != state.config.model.image_size)
    throw ConfigError("dataset and model image sizes differ");
  TrainResult result{std::move(state), {}};
  auto& st = result.state;
  std::size_t flushed = 0;
  auto flush_trace = [&] {
    if (options.trace_csv.empty() || flushed == result.trace.size()) return;
    append_trace_csv(options.trace_csv,
                     LossTrace(result.trace.begin() + static_cast<long>(flushed), result.trace.end()));
    flushed = result.trace.size();
  };
  while (st.step < st.config.steps) {
    result.trace.push_back(train_step(dataset, st));
    if (options.on_step) options.on_step(result.trace.back());
    if (options.checkpoint_every > 0 && st.step % options.checkpoint_every == 0) {
      flush_trace();
      if (!options.checkpoint_path.empty()) save_checkpoint(st, options.checkpoint_path);
    }
  }
  flush_trace();
  if (!options.checkpoint_path.empty()) save_checkpoint(st, options.checkpoint_path);
  return result;
}

TrainResult train(const GroundTruthDataset& dataset, const TrainConfig& config,
                  const TrainOptions& options) {
  return resume(dataset, RunState::initial(config), options);
}

void save_checkpoint(const RunState& state, const std::filesystem::path& path) {
  auto& mutable_state = const_cast<RunState&>(state);  // tensor refs are only read here
  const auto refs = checkpoint_tensors(mutable_state);

  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["run_id"] = state.run_id;
  manifest["step"] = state.step;
  manifest["config"] = state.config;
  manifest["adam_t"] = {{"encoder", state.encoder_opt.t},
                        {"decoder", state.decoder_opt.t},
                        {"discriminator", state.discriminator_opt.t}};
  std::string payload;
  auto& table = manifest["tensors"] = nlohmann::json::array();
  for (const auto& ref : refs) {
    const std::string bytes = tensor_bytes(ref.tensor->values);
    table.push_back({{"name", ref.name},
                     {"shape", ref.tensor->shape},
                     {"offset", payload.size()},
                     {"count", ref.tensor->values.size()},
                     {"crc32", crc_of(bytes.data(), bytes.size())}});
    payload += bytes;
  }
  manifest["payload_bytes"] = payload.size();
  manifest["payload_crc32"] = crc_of(payload.data(), payload.size());
  const std::string header = manifest.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    write_u64(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

RunState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw IntegrityError("not a checkpoint file: " + path.string());
  const std::uint64_t header_size = read_u64(bytes, 8);
  if (header_size > bytes.size() - 16) throw IntegrityError("checkpoint manifest truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint manifest unreadable: ") + e.what());
  }
  const std::size_t payload_start = 16 + header_size;
  const auto payload_bytes = manifest.at("payload_bytes").get<std::size_t>();
  if (bytes.size() - payload_start != payload_bytes)
    throw IntegrityError("checkpoint payload size mismatch (truncated or padded file)");
  if (crc_of(bytes.data() + payload_start, payload_bytes) !=
      manifest.at("payload_crc32").get<std::uint32_t>())
    throw IntegrityError("checkpoint payload checksum mismatch");

  RunState state = RunState::initial(manifest.at("config").get<TrainConfig>(),
                                     manifest.at("run_id").get<std::string>());
  state.step = manifest.at("step").get<long>();
  state.encoder_opt.t = manifest.at("adam_t").at("encoder").get<long>();
  state.decoder_opt.t = manifest.at("adam_t").at("decoder").get<long>();
  state.discriminator_opt.t = manifest.at("adam_t").at("discriminator").get<long>();

  std::map<std::string, const nlohmann::json*> entries;
  for (const auto& entry : manifest.at("tensors")) entries[entry.at("name").get<std::string>()] = &entry;
  const auto refs = checkpoint_tensors(state);
  if (refs.size() != entries.size()) throw IntegrityError("checkpoint tensor table mismatch");
  for (const auto& ref : refs) {
    const auto it = entries.find(ref.name);
    if (it == entries.end()) throw IntegrityError("checkpoint lacks tensor " + ref.name);
    const auto& entry = *it->second;
    if (entry.at("shape").get<std::vector<std::size_t>>() != ref.tensor->shape)
      throw IntegrityError("shape mismatch for tensor " + ref.name);
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (count != ref.tensor->values.size() || offset + count * 4 > payload_bytes)
      throw IntegrityError("bad extent for tensor " + ref.name);
    const char* src = bytes.data() + payload_start + offset;
    if (crc_of(src, count * 4) != entry.at("crc32").get<std::uint32_t>())
      throw IntegrityError("checksum mismatch for tensor " + ref.name);
    tensor_from_bytes(src, ref.tensor->values);
  }
  return state;
}

void append_trace_csv(const std::filesystem::path& path, const LossTrace& records) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to trace " + path.string());
  if (fresh) out << "step,recon,kl,reg,tc,disc_loss\n";
  char line[256];
  for (const auto& r : records) {
    int len = std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g,%.17g,", r.step, r.recon,
                            r.kl, r.reg, r.tc);
    out.write(line, len);
    if (std::isfinite(r.disc_loss)) {
      len = std::snprintf(line, sizeof line, "%.17g", r.disc_loss);
      out.write(line, len);
    }
    out << '\n';
  }
}

LossTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trace " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "step,recon,kl,reg,tc,disc_loss") throw SchemaError("unexpected trace header");
  LossTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (fields.size() != 6) throw SchemaError("trace row has " + std::to_string(fields.size()) + " fields");
    StepRecord r;
    r.step = std::stol(fields[0]);
    r.recon = std::stod(fields[1]);
    r.kl = std::stod(fields[2]);
    r.reg = std::stod(fields[3]);
    r.tc = std::stod(fields[4]);
    r.disc_loss = fields[5].empty() ? std::nan("") : std::stod(fields[5]);
    trace.push_back(r);
  }
  return trace;
}

}  // namespace disent
