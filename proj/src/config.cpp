#include "disent/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

#include "disent/errors.hpp"

namespace disent {
namespace {

using Keys = std::set<std::string_view>;

void reject_unknown(const toml::table& table, const Keys& allowed, std::string_view where) {
  for (auto&& [key, node] : table) {
    (void)node;
    if (!allowed.contains(key.str()))
      throw ConfigError("unknown key '" + std::string(key.str()) + "' in [" + std::string(where) + "]");
  }
}

const toml::table* section(const toml::table& root, std::string_view name) {
  const toml::node* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) throw ConfigError("'" + std::string(name) + "' must be a table");
  return node->as_table();
}

template <class T>
void read(const toml::table& table, std::string_view key, T& out, std::string_view where) {
  const toml::node* node = table.get(key);
  if (!node) return;
  std::optional<T> value;
  if constexpr (std::is_same_v<T, double>) {
    value = node->value<double>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    value = node->value<std::string>();
  } else {
    const auto v = node->value<std::int64_t>();
    if (v) {
      if constexpr (std::is_unsigned_v<T>) {
        if (*v < 0) throw ConfigError(std::string(where) + "." + std::string(key) + " must be >= 0");
      }
      value = static_cast<T>(*v);
    }
  }
  if (!value)
    throw ConfigError("wrong type for " + std::string(where) + "." + std::string(key));
  out = *value;
}

template <class T>
std::vector<T> read_list(const toml::table& table, std::string_view key, std::string_view where) {
  const toml::node* node = table.get(key);
  if (!node) return {};
  const toml::array* arr = node->as_array();
  if (!arr) throw ConfigError(std::string(where) + "." + std::string(key) + " must be an array");
  std::vector<T> out;
  for (const auto& item : *arr) {
    if constexpr (std::is_same_v<T, std::string>) {
      const auto v = item.value<std::string>();
      if (!v) throw ConfigError(std::string(where) + "." + std::string(key) + " must hold strings");
      out.push_back(*v);
    } else {
      const auto v = item.value<std::int64_t>();
      if (!v) throw ConfigError(std::string(where) + "." + std::string(key) + " must hold integers");
      if (std::is_unsigned_v<T> && *v < 0)
        throw ConfigError(std::string(where) + "." + std::string(key) + " must be non-negative");
      out.push_back(static_cast<T>(*v));
    }
  }
  return out;
}

const Keys kRegularizerFields = {"beta", "gamma", "c_max", "anneal_steps", "lambda_od", "lambda_d"};

void read_regularizer_fields(const toml::table& t, RegularizerConfig& r, std::string_view where) {
  read(t, "beta", r.beta, where);
  read(t, "gamma", r.gamma, where);
  read(t, "c_max", r.c_max, where);
  read(t, "anneal_steps", r.anneal_steps, where);
  read(t, "lambda_od", r.lambda_od, where);
  read(t, "lambda_d", r.lambda_d, where);
}

}  // namespace

RegularizerConfig SweepSpec::regularizer_for(RegularizerKind kind) const {
  const auto it = regularizers.find(kind);
  return it != regularizers.end() ? it->second : RegularizerConfig::defaults_for(kind);
}

void SweepSpec::validate() const {
  dataset.validate();
  metrics.validate();
  if (grid.kinds.empty() || grid.latent_dims.empty() || grid.steps.empty() || grid.seeds.empty())
    throw ConfigError("sweep axes kinds, latent_dims, steps and seeds must all be non-empty");
  for (long s : grid.steps)
    if (s < 1) throw ConfigError("sweep steps must be >= 1");
  for (int d : grid.latent_dims)
    if (d < 1) throw ConfigError("sweep latent_dims must be >= 1");
  const std::set<std::uint64_t> distinct(grid.seeds.begin(), grid.seeds.end());
  if (distinct.size() != grid.seeds.size()) throw ConfigError("sweep seeds must be distinct");
  for (const auto& [kind, reg] : regularizers) {
    (void)kind;
    reg.validate();
  }
  if (train.model.image_size != dataset.image_size)
    throw ConfigError("model image_size differs from dataset image_size");
}

SweepSpec parse_sweep_spec(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
  reject_unknown(root, {"dataset", "model", "regularizer", "train", "sweep", "metrics"}, "root");

  SweepSpec spec;
  if (const auto* t = section(root, "dataset")) {
    reject_unknown(*t, {"image_size", "render_seed"}, "dataset");
    read(*t, "image_size", spec.dataset.image_size, "dataset");
    read(*t, "render_seed", spec.dataset.render_seed, "dataset");
  }
  spec.train.model.image_size = spec.dataset.image_size;
  if (const auto* t = section(root, "model")) {
    reject_unknown(*t, {"latent_dim", "activation_slope", "conv_widths", "fc_width"}, "model");
    read(*t, "latent_dim", spec.train.model.latent_dim, "model");
    read(*t, "activation_slope", spec.train.model.activation_slope, "model");
    spec.train.model.conv_widths = read_list<int>(*t, "conv_widths", "model");
    read(*t, "fc_width", spec.train.model.fc_width, "model");
  }
  if (const auto* t = section(root, "regularizer")) {
    Keys allowed = kRegularizerFields;
    allowed.insert("kind");
    for (auto kind : {RegularizerKind::beta, RegularizerKind::annealed, RegularizerKind::factor,
                      RegularizerKind::dip_i, RegularizerKind::dip_ii, RegularizerKind::btc})
      allowed.insert(to_string(kind));
    reject_unknown(*t, allowed, "regularizer");
    for (auto&& [key, node] : *t) {
      if (!node.is_table()) continue;
      const auto kind = parse_regularizer_kind(key.str());
      const std::string where = "regularizer." + std::string(key.str());
      reject_unknown(*node.as_table(), kRegularizerFields, where);
      RegularizerConfig reg = RegularizerConfig::defaults_for(kind);
      read_regularizer_fields(*node.as_table(), reg, where);
      spec.regularizers[kind] = reg;
    }
    std::string kind_name = "beta";
    read(*t, "kind", kind_name, "regularizer");
    const auto kind = parse_regularizer_kind(kind_name);
    RegularizerConfig reg = spec.regularizer_for(kind);
    toml::table fields = *t;  // "beta" is both a field and a kind subtable
    for (auto it = fields.begin(); it != fields.end();) it = it->second.is_table() ? fields.erase(it) : std::next(it);
    read_regularizer_fields(fields, reg, "regularizer");
    spec.regularizers[kind] = reg;
    spec.train.regularizer = reg;
  }
  if (const auto* t = section(root, "train")) {
    reject_unknown(*t, {"steps", "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "seed",
                        "discriminator"},
                   "train");
    read(*t, "steps", spec.train.steps, "train");
    read(*t, "batch_size", spec.train.batch_size, "train");
    read(*t, "learning_rate", spec.train.learning_rate, "train");
    read(*t, "adam_beta1", spec.train.adam_beta1, "train");
    read(*t, "adam_beta2", spec.train.adam_beta2, "train");
    read(*t, "seed", spec.train.seed, "train");
    if (const auto* d = section(*t, "discriminator")) {
      reject_unknown(*d, {"hidden_width", "num_layers", "learning_rate", "beta1", "beta2"},
                     "train.discriminator");
      auto& disc = spec.train.discriminator;
      read(*d, "hidden_width", disc.hidden_width, "train.discriminator");
      read(*d, "num_layers", disc.num_layers, "train.discriminator");
      read(*d, "learning_rate", disc.learning_rate, "train.discriminator");
      read(*d, "beta1", disc.beta1, "train.discriminator");
      read(*d, "beta2", disc.beta2, "train.discriminator");
    }
  }
  // Without a [sweep] table the grid is the single [train] run.
  spec.grid.kinds = {spec.train.regularizer.kind};
  spec.grid.latent_dims = {spec.train.model.latent_dim};
  spec.grid.steps = {spec.train.steps};
  spec.grid.seeds = {spec.train.seed};
  if (const auto* t = section(root, "sweep")) {
    reject_unknown(*t, {"kinds", "latent_dims", "steps", "seeds", "output_dir"}, "sweep");
    if (t->contains("kinds")) {
      spec.grid.kinds.clear();
      for (const auto& name : read_list<std::string>(*t, "kinds", "sweep"))
        spec.grid.kinds.push_back(parse_regularizer_kind(name));
    }
    if (t->contains("latent_dims")) spec.grid.latent_dims = read_list<int>(*t, "latent_dims", "sweep");
    if (t->contains("steps")) spec.grid.steps = read_list<long>(*t, "steps", "sweep");
    if (t->contains("seeds")) spec.grid.seeds = read_list<std::uint64_t>(*t, "seeds", "sweep");
    std::string out;
    read(*t, "output_dir", out, "sweep");
    if (!out.empty()) spec.output_dir = out;
  }
  if (spec.output_dir.is_relative() && !base_dir.empty()) spec.output_dir = base_dir / spec.output_dir;
  if (const auto* t = section(root, "metrics")) {
    reject_unknown(*t, {"fv_votes_train", "fv_votes_eval", "fv_batch", "prune_std_threshold",
                        "fv_std_samples", "mig_bins", "mig_samples", "dci_test_fraction",
                        "dci_trees", "dci_max_depth", "irs_diff_quantile", "seed"},
                   "metrics");
    auto& m = spec.metrics;
    read(*t, "fv_votes_train", m.fv_votes_train, "metrics");
    read(*t, "fv_votes_eval", m.fv_votes_eval, "metrics");
    read(*t, "fv_batch", m.fv_batch, "metrics");
    read(*t, "prune_std_threshold", m.prune_std_threshold, "metrics");
    read(*t, "fv_std_samples", m.fv_std_samples, "metrics");
    read(*t, "mig_bins", m.mig_bins, "metrics");
    read(*t, "mig_samples", m.mig_samples, "metrics");
    read(*t, "dci_test_fraction", m.dci_test_fraction, "metrics");
    read(*t, "dci_trees", m.dci_trees, "metrics");
    read(*t, "dci_max_depth", m.dci_max_depth, "metrics");
    read(*t, "irs_diff_quantile", m.irs_diff_quantile, "metrics");
    read(*t, "seed", m.seed, "metrics");
  }
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_sweep_spec(buffer.str(), path.parent_path());
}

}  // namespace disent
