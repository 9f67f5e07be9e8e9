#pragma once

// Procedural ground-truth-factor image dataset.
//
// Five independent discrete factors (shape, scale, orientation, pos_x, pos_y)
// are rendered as an anti-aliased grayscale sprite. Rendering is a pure
// function of (DatasetSpec, FactorTuple).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "disent/rng.hpp"

namespace disent {

struct FactorSpace {
  std::vector<std::string> names;
  std::vector<int> cardinalities;

  std::size_t size() const { return cardinalities.size(); }
  /// Product of cardinalities.
  std::uint64_t num_configurations() const;
  /// Throws ConfigError unless K >= 2, names match, and every cardinality >= 2.
  void validate() const;

  static FactorSpace toy();
  friend bool operator==(const FactorSpace&, const FactorSpace&) = default;
};

/// One configuration of the ground-truth factors.
struct FactorTuple {
  std::vector<int> values;
  friend bool operator==(const FactorTuple&, const FactorTuple&) = default;
  friend auto operator<=>(const FactorTuple&, const FactorTuple&) = default;
};

/// H x W grayscale image with intensities in [0, 1].
struct Observation {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct DatasetSpec {
  int image_size = 32;
  FactorSpace factor_space = FactorSpace::toy();
  std::uint64_t render_seed = 0;

  void validate() const;
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Index positions of the five rendered factors.
enum FactorIndex : std::size_t { kShape = 0, kScale, kOrientation, kPosX, kPosY };

struct FixedFactorSample {
  int value = 0;
  std::vector<FactorTuple> tuples;
};

class GroundTruthDataset {
 public:
  /// Validates `spec` and precomputes the rendering constants.
  static GroundTruthDataset build(const DatasetSpec& spec);

  const DatasetSpec& spec() const { return spec_; }
  const FactorSpace& factors() const { return spec_.factor_space; }
  int image_size() const { return spec_.image_size; }
  std::size_t pixels_per_image() const {
    return static_cast<std::size_t>(spec_.image_size) * spec_.image_size;
  }
  std::uint64_t num_configurations() const { return spec_.factor_space.num_configurations(); }

  Observation render(const FactorTuple& factors) const;
  /// Renders into caller storage of pixels_per_image() floats.
  void render_into(const FactorTuple& factors, std::span<float> out) const;

  /// i.i.d. uniform tuples over the configuration grid.
  std::vector<FactorTuple> sample_factors(std::size_t n, Rng& rng) const;
  /// Draws one value of factor k, then n tuples sharing it; the rest i.i.d.
  FixedFactorSample sample_fixed_factor(std::size_t k, std::size_t n, Rng& rng) const;

  /// Mixed-radix enumeration of the grid (last factor varies fastest).
  FactorTuple tuple_at(std::uint64_t index) const;
  std::uint64_t index_of(const FactorTuple& factors) const;

  void check_tuple(const FactorTuple& factors) const;

 private:
  explicit GroundTruthDataset(DatasetSpec spec);

  DatasetSpec spec_;
  // Procedural constants fixed by render_seed.
  double ellipse_minor_ = 0.55;
  double triangle_base_half_ = 0.6;
  double offset_x_ = 0.0;
  double offset_y_ = 0.0;
};

}  // namespace disent
