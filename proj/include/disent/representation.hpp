#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "disent/dataset.hpp"
#include "disent/matrix.hpp"

namespace disent {

/// Latent codes paired row-by-row with the ground-truth factors that produced them.
struct RepresentationMatrix {
  MatrixD codes;          // n x d
  Matrix<int> factors;    // n x K
  FactorSpace factor_space;

  std::size_t size() const { return codes.rows; }
  std::size_t latent_dim() const { return codes.cols; }
  std::size_t num_factors() const { return factors.cols; }

  /// Throws DomainError on misaligned rows, out-of-range factors or non-finite codes.
  void validate() const;
};

/// CSV with header z0..z{d-1},f0..f{K-1}. Factor cardinalities are taken as
/// max value + 1 per column and names as f0..f{K-1}.
RepresentationMatrix read_representation_csv(const std::filesystem::path& path);
void write_representation_csv(const RepresentationMatrix& rep, const std::filesystem::path& path);

/// Codes equal to the factor values themselves (the identity oracle).
RepresentationMatrix identity_representation(const FactorSpace& space,
                                             const std::vector<FactorTuple>& tuples);

/// Every configuration of the grid, enumerated in mixed-radix order.
std::vector<FactorTuple> full_grid(const GroundTruthDataset& dataset);

/// Anything that maps images (rows of n x H*W) to deterministic codes.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t latent_dim() const = 0;
  virtual MatrixD encode_mean(const MatrixF& images) const = 0;
};

/// Renders the tuples in chunks and encodes them; row i belongs to tuples[i].
MatrixD encode_tuples(const Encoder& encoder, const GroundTruthDataset& dataset,
                      const std::vector<FactorTuple>& tuples);

/// Encodes n freshly sampled observations together with their factors.
RepresentationMatrix encode_dataset(const Encoder& encoder, const GroundTruthDataset& dataset,
                                    std::size_t n, Rng& rng);

/// Recovers the factor values of a rendered image by lookup over the whole
/// grid. Requires an injective renderer; throws DomainError on unknown images.
class FactorLookupEncoder final : public Encoder {
 public:
  explicit FactorLookupEncoder(const GroundTruthDataset& dataset);
  std::size_t latent_dim() const override { return dataset_.factors().size(); }
  MatrixD encode_mean(const MatrixF& images) const override;

 private:
  const GroundTruthDataset& dataset_;
  std::unordered_multimap<std::uint64_t, std::uint64_t> index_;
};

/// Outputs the same code for every image.
class ConstantEncoder final : public Encoder {
 public:
  explicit ConstantEncoder(std::vector<double> code) : code_(std::move(code)) {}
  std::size_t latent_dim() const override { return code_.size(); }
  MatrixD encode_mean(const MatrixF& images) const override;

 private:
  std::vector<double> code_;
};

}  // namespace disent
