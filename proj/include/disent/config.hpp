#pragma once

// Experiment configuration files (TOML).
//
//   [dataset]      image_size, render_seed
//   [model]        latent_dim, activation_slope, conv_widths, fc_width
//   [regularizer]  kind plus fields for that kind; [regularizer.<kind>]
//                  subtables set fields for any kind named in a sweep
//   [train]        steps, batch_size, learning_rate, adam_beta1, adam_beta2,
//                  seed; [train.discriminator] for FactorVAE
//   [sweep]        kinds, latent_dims, steps, seeds, output_dir
//   [metrics]      any MetricConfig field
//
// Unknown keys are rejected.

#include <filesystem>
#include <map>
#include <string_view>
#include <vector>

#include "disent/dataset.hpp"
#include "disent/metrics.hpp"
#include "disent/regularizers.hpp"
#include "disent/training.hpp"

namespace disent {

struct SweepGrid {
  std::vector<RegularizerKind> kinds;
  std::vector<int> latent_dims;
  std::vector<long> steps;
  std::vector<std::uint64_t> seeds;
};

struct SweepSpec {
  DatasetSpec dataset;
  /// Template for every run; its regularizer is the [regularizer] kind.
  TrainConfig train;
  /// Settings used when a sweep selects a kind; kinds without an entry use defaults_for.
  std::map<RegularizerKind, RegularizerConfig> regularizers;
  SweepGrid grid;
  MetricConfig metrics;
  std::filesystem::path output_dir = "runs";

  RegularizerConfig regularizer_for(RegularizerKind kind) const;
  /// Throws ConfigError on empty axes, duplicate seeds or invalid sub-configs.
  void validate() const;
};

/// Parses TOML text. Relative output_dir values are resolved against base_dir.
SweepSpec parse_sweep_spec(std::string_view toml_text,
                           const std::filesystem::path& base_dir = {});
SweepSpec load_sweep_spec(const std::filesystem::path& path);

}  // namespace disent
