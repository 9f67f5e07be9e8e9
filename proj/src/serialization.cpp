#include "disent/serialization.hpp"

#include <cstdio>

namespace disent {

using nlohmann::json;

void to_json(json& j, const FactorSpace& v) {
  j = json{{"names", v.names}, {"cardinalities", v.cardinalities}};
}
void from_json(const json& j, FactorSpace& v) {
  j.at("names").get_to(v.names);
  j.at("cardinalities").get_to(v.cardinalities);
}

void to_json(json& j, const DatasetSpec& v) {
  j = json{{"image_size", v.image_size}, {"factor_space", v.factor_space},
           {"render_seed", v.render_seed}};
}
void from_json(const json& j, DatasetSpec& v) {
  v = DatasetSpec{};
  v.image_size = j.value("image_size", v.image_size);
  if (j.contains("factor_space")) j.at("factor_space").get_to(v.factor_space);
  v.render_seed = j.value("render_seed", v.render_seed);
}

void to_json(json& j, const ModelConfig& v) {
  j = json{{"image_size", v.image_size},   {"latent_dim", v.latent_dim},
           {"activation_slope", v.activation_slope}, {"conv_widths", v.resolved_conv_widths()},
           {"fc_width", v.fc_width}};
}
void from_json(const json& j, ModelConfig& v) {
  v = ModelConfig{};
  v.image_size = j.value("image_size", v.image_size);
  v.latent_dim = j.value("latent_dim", v.latent_dim);
  v.activation_slope = j.value("activation_slope", v.activation_slope);
  if (j.contains("conv_widths")) j.at("conv_widths").get_to(v.conv_widths);
  if (v.conv_widths == [&] { ModelConfig base; base.image_size = v.image_size; return base.resolved_conv_widths(); }()) v.conv_widths.clear();
  v.fc_width = j.value("fc_width", v.fc_width);
}

void to_json(json& j, const RegularizerConfig& v) {
  j = json{{"kind", std::string(to_string(v.kind))},
           {"beta", v.beta},
           {"gamma", v.gamma},
           {"c_max", v.c_max},
           {"anneal_steps", v.anneal_steps},
           {"lambda_od", v.lambda_od},
           {"lambda_d", v.lambda_d}};
}
void from_json(const json& j, RegularizerConfig& v) {
  v = RegularizerConfig::defaults_for(parse_regularizer_kind(j.value("kind", std::string("beta"))));
  v.beta = j.value("beta", v.beta);
  v.gamma = j.value("gamma", v.gamma);
  v.c_max = j.value("c_max", v.c_max);
  v.anneal_steps = j.value("anneal_steps", v.anneal_steps);
  v.lambda_od = j.value("lambda_od", v.lambda_od);
  v.lambda_d = j.value("lambda_d", v.lambda_d);
}

void to_json(json& j, const DiscriminatorConfig& v) {
  j = json{{"hidden_width", v.hidden_width}, {"num_layers", v.num_layers},
           {"learning_rate", v.learning_rate}, {"beta1", v.beta1}, {"beta2", v.beta2}};
}
void from_json(const json& j, DiscriminatorConfig& v) {
  v = DiscriminatorConfig{};
  v.hidden_width = j.value("hidden_width", v.hidden_width);
  v.num_layers = j.value("num_layers", v.num_layers);
  v.learning_rate = j.value("learning_rate", v.learning_rate);
  v.beta1 = j.value("beta1", v.beta1);
  v.beta2 = j.value("beta2", v.beta2);
}

void to_json(json& j, const TrainConfig& v) {
  j = json{{"steps", v.steps},
           {"batch_size", v.batch_size},
           {"learning_rate", v.learning_rate},
           {"adam_beta1", v.adam_beta1},
           {"adam_beta2", v.adam_beta2},
           {"seed", v.seed},
           {"model", v.model},
           {"regularizer", v.regularizer},
           {"discriminator", v.discriminator}};
}
void from_json(const json& j, TrainConfig& v) {
  v = TrainConfig{};
  v.steps = j.value("steps", v.steps);
  v.batch_size = j.value("batch_size", v.batch_size);
  v.learning_rate = j.value("learning_rate", v.learning_rate);
  v.adam_beta1 = j.value("adam_beta1", v.adam_beta1);
  v.adam_beta2 = j.value("adam_beta2", v.adam_beta2);
  v.seed = j.value("seed", v.seed);
  if (j.contains("model")) j.at("model").get_to(v.model);
  if (j.contains("regularizer")) j.at("regularizer").get_to(v.regularizer);
  if (j.contains("discriminator")) j.at("discriminator").get_to(v.discriminator);
}

void to_json(json& j, const MetricConfig& v) {
  j = json{{"fv_votes_train", v.fv_votes_train},
           {"fv_votes_eval", v.fv_votes_eval},
           {"fv_batch", v.fv_batch},
           {"prune_std_threshold", v.prune_std_threshold},
           {"fv_std_samples", v.fv_std_samples},
           {"mig_bins", v.mig_bins},
           {"mig_samples", v.mig_samples},
           {"dci_test_fraction", v.dci_test_fraction},
           {"dci_trees", v.dci_trees},
           {"dci_max_depth", v.dci_max_depth},
           {"irs_diff_quantile", v.irs_diff_quantile},
           {"seed", v.seed}};
}
void from_json(const json& j, MetricConfig& v) {
  v = MetricConfig{};
  v.fv_votes_train = j.value("fv_votes_train", v.fv_votes_train);
  v.fv_votes_eval = j.value("fv_votes_eval", v.fv_votes_eval);
  v.fv_batch = j.value("fv_batch", v.fv_batch);
  v.prune_std_threshold = j.value("prune_std_threshold", v.prune_std_threshold);
  v.fv_std_samples = j.value("fv_std_samples", v.fv_std_samples);
  v.mig_bins = j.value("mig_bins", v.mig_bins);
  v.mig_samples = j.value("mig_samples", v.mig_samples);
  v.dci_test_fraction = j.value("dci_test_fraction", v.dci_test_fraction);
  v.dci_trees = j.value("dci_trees", v.dci_trees);
  v.dci_max_depth = j.value("dci_max_depth", v.dci_max_depth);
  v.irs_diff_quantile = j.value("irs_diff_quantile", v.irs_diff_quantile);
  v.seed = j.value("seed", v.seed);
}

void to_json(json& j, const MetricReport& v) {
  j = json{{"factor_vae", v.factor_vae},
           {"sap", v.sap},
           {"dci", v.dci},
           {"irs", v.irs},
           {"mig", v.mig},
           {"dci_completeness", v.dci_detail.completeness},
           {"dci_informativeness", v.dci_detail.informativeness}};
}
void from_json(const json& j, MetricReport& v) {
  j.at("factor_vae").get_to(v.factor_vae);
  j.at("sap").get_to(v.sap);
  j.at("dci").get_to(v.dci);
  j.at("irs").get_to(v.irs);
  j.at("mig").get_to(v.mig);
  v.dci_detail.disentanglement = v.dci;
  v.dci_detail.completeness = j.value("dci_completeness", 0.0);
  v.dci_detail.informativeness = j.value("dci_informativeness", 0.0);
}

std::string stable_digest(const json& value) {
  // nlohmann::json objects are std::map-backed, so dump() is key-sorted.
  const std::string text = value.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace disent
