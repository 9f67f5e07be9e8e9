#pragma once

// Disentanglement metrics: FactorVAE score, SAP, DCI, IRS and MIG.
//
// All scores are in [0, 1]. Ties resolve to the lowest index throughout.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "disent/dataset.hpp"
#include "disent/representation.hpp"

namespace disent {

struct MetricConfig {
  int fv_votes_train = 800;
  int fv_votes_eval = 400;
  int fv_batch = 64;
  double prune_std_threshold = 0.05;
  int fv_std_samples = 10000;  // codes used to estimate the global std
  int mig_bins = 20;
  int mig_samples = 10000;
  double dci_test_fraction = 0.2;
  int dci_trees = 10;
  int dci_max_depth = 8;
  double irs_diff_quantile = 0.99;
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive counts, bins < 2 or fractions outside (0, 1).
  void validate() const;
  friend bool operator==(const MetricConfig&, const MetricConfig&) = default;
};

struct DciScores {
  double disentanglement = 0;
  double completeness = 0;
  double informativeness = 0;
};

struct MetricReport {
  double factor_vae = 0;
  double sap = 0;
  double dci = 0;  // the disentanglement component
  double irs = 0;
  double mig = 0;
  DciScores dci_detail;

  /// Throws DomainError unless every score is finite and within [0, 1].
  void validate() const;
};

/// Raised by evaluate_all; the original error is nested (std::rethrow_if_nested).
class MetricError : public std::runtime_error {
 public:
  MetricError(std::string metric, const std::string& what)
      : std::runtime_error(metric + ": " + what), metric_(std::move(metric)) {}
  const std::string& metric() const { return metric_; }

 private:
  std::string metric_;
};

/// Equal-width histogram bin of each column over its own range; constant columns map to 0.
Matrix<int> discretize_latents(const MatrixD& codes, int bins);

/// Plug-in entropy in nats of a label vector.
double discrete_entropy(std::span<const int> labels);
/// Plug-in mutual information in nats from joint counts.
double discrete_mutual_information(std::span<const int> a, std::span<const int> b);

double mig(const RepresentationMatrix& rep, const MetricConfig& cfg);

/// Source of latent codes for the FactorVAE voting protocol.
class FixedFactorSampler {
 public:
  virtual ~FixedFactorSampler() = default;
  virtual std::size_t num_factors() const = 0;
  /// Codes of n observations with all factors random.
  virtual MatrixD sample_codes(std::size_t n, Rng& rng) const = 0;
  /// Codes of n observations sharing one random value of factor k.
  virtual MatrixD sample_fixed_codes(std::size_t k, std::size_t n, Rng& rng) const = 0;
};

/// Renders and encodes fresh observations.
class EncoderSampler final : public FixedFactorSampler {
 public:
  EncoderSampler(const Encoder& encoder, const GroundTruthDataset& dataset)
      : encoder_(encoder), dataset_(dataset) {}
  std::size_t num_factors() const override { return dataset_.factors().size(); }
  MatrixD sample_codes(std::size_t n, Rng& rng) const override;
  MatrixD sample_fixed_codes(std::size_t k, std::size_t n, Rng& rng) const override;

 private:
  const Encoder& encoder_;
  const GroundTruthDataset& dataset_;
};

/// Draws rows of a precomputed representation. A fixed-factor batch picks a
/// random row, then samples (with replacement) rows sharing its factor k value.
class TableSampler final : public FixedFactorSampler {
 public:
  explicit TableSampler(const RepresentationMatrix& rep);
  std::size_t num_factors() const override { return rep_.num_factors(); }
  MatrixD sample_codes(std::size_t n, Rng& rng) const override;
  MatrixD sample_fixed_codes(std::size_t k, std::size_t n, Rng& rng) const override;

 private:
  const RepresentationMatrix& rep_;
  // groups_[k][v]: rows whose factor k equals v.
  std::vector<std::vector<std::vector<std::size_t>>> groups_;
};

/// Majority-vote accuracy of predicting the fixed factor from the dimension of
/// least normalized variance. `global_std` holds per-dim std of the codes;
/// dims below the prune threshold never vote.
double factor_vae_score(const FixedFactorSampler& sampler, std::span<const double> global_std,
                        const MetricConfig& cfg, Rng& rng);
/// Same, estimating the global std from cfg.fv_std_samples sampled codes.
double factor_vae_score(const FixedFactorSampler& sampler, const MetricConfig& cfg, Rng& rng);

double sap(const RepresentationMatrix& rep, const MetricConfig& cfg);

/// Disentanglement and completeness of an importance matrix R (d x K, non-negative).
/// Informativeness is left at zero.
DciScores dci_from_importance(const MatrixD& importance);
DciScores dci(const RepresentationMatrix& rep, const MetricConfig& cfg, Rng& rng);

double irs(const RepresentationMatrix& rep, const MetricConfig& cfg);

/// Encodes cfg.mig_samples observations once for MIG, SAP, DCI and IRS; the
/// FactorVAE score draws its own fixed-factor batches from the encoder.
MetricReport evaluate_all(const Encoder& encoder, const GroundTruthDataset& dataset,
                          const MetricConfig& cfg, Rng& rng);
/// All five scores from a stored representation (FactorVAE via TableSampler).
MetricReport evaluate_representation(const RepresentationMatrix& rep, const MetricConfig& cfg,
                                     Rng& rng);

}  // namespace disent
