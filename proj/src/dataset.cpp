#include "disent/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "disent/errors.hpp"

namespace disent {
namespace {

constexpr double kOrientationSpanDeg = 160.0;

struct Vec2 {
  double x, y;
};

Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double length(Vec2 a) { return std::sqrt(dot(a, a)); }
double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Approximate signed distance to an axis-aligned ellipse with semi-axes (a, b).
double sd_ellipse(Vec2 p, double a, double b) {
  const double k0 = std::hypot(p.x / a, p.y / b);
  const double k1 = std::hypot(p.x / (a * a), p.y / (b * b));
  if (k1 == 0.0) return -std::min(a, b);
  return k0 * (k0 - 1.0) / k1;
}

double sd_triangle(Vec2 p, Vec2 p0, Vec2 p1, Vec2 p2) {
  const Vec2 e0 = p1 - p0, e1 = p2 - p1, e2 = p0 - p2;
  const Vec2 v0 = p - p0, v1 = p - p1, v2 = p - p2;
  const Vec2 pq0 = v0 - e0 * std::clamp(dot(v0, e0) / dot(e0, e0), 0.0, 1.0);
  const Vec2 pq1 = v1 - e1 * std::clamp(dot(v1, e1) / dot(e1, e1), 0.0, 1.0);
  const Vec2 pq2 = v2 - e2 * std::clamp(dot(v2, e2) / dot(e2, e2), 0.0, 1.0);
  const double s = sign(e0.x * e2.y - e0.y * e2.x);
  const double dist = std::min({dot(pq0, pq0), dot(pq1, pq1), dot(pq2, pq2)});
  const double side = std::min({s * (v0.x * e0.y - v0.y * e0.x), s * (v1.x * e1.y - v1.y * e1.x),
                                s * (v2.x * e2.y - v2.y * e2.x)});
  return -std::sqrt(dist) * sign(side);
}

// Heart outline of unit-ish size, tip at the origin pointing down.
double sd_heart(Vec2 p) {
  p.x = std::abs(p.x);
  if (p.y + p.x > 1.0) return length(p - Vec2{0.25, 0.75}) - std::numbers::sqrt2 / 4.0;
  const double m = 0.5 * std::max(p.x + p.y, 0.0);
  const double d = std::min(dot(p - Vec2{0.0, 1.0}, p - Vec2{0.0, 1.0}), dot(p - Vec2{m, m}, p - Vec2{m, m}));
  return std::sqrt(d) * sign(p.x - p.y);
}

double lerp_grid(double lo, double hi, int value, int cardinality) {
  return lo + (hi - lo) * static_cast<double>(value) / static_cast<double>(cardinality - 1);
}

}  // namespace

std::uint64_t FactorSpace::num_configurations() const {
  std::uint64_t total = 1;
  for (int c : cardinalities) total *= static_cast<std::uint64_t>(c);
  return total;
}

void FactorSpace::validate() const {
  if (cardinalities.size() < 2) throw ConfigError("factor space needs at least 2 factors");
  if (names.size() != cardinalities.size())
    throw ConfigError("factor names and cardinalities differ in length");
  for (std::size_t k = 0; k < cardinalities.size(); ++k)
    if (cardinalities[k] < 2)
      throw ConfigError("factor '" + names[k] + "' has cardinality < 2");
}

FactorSpace FactorSpace::toy() {
  return {{"shape", "scale", "orientation", "pos_x", "pos_y"}, {3, 6, 8, 16, 16}};
}

void DatasetSpec::validate() const {
  if (image_size != 32 && image_size != 64)
    throw ConfigError("image_size must be 32 or 64, got " + std::to_string(image_size));
  factor_space.validate();
  if (factor_space.size() != 5)
    throw ConfigError("the rendered dataset has exactly 5 factors (shape, scale, orientation, pos_x, pos_y)");
  if (factor_space.cardinalities[kShape] > 3)
    throw ConfigError("shape factor supports at most 3 shapes");
  const int max_pos = image_size / 2;
  if (factor_space.cardinalities[kPosX] > max_pos || factor_space.cardinalities[kPosY] > max_pos)
    throw ConfigError("position cardinality exceeds the pixel grid");
}

GroundTruthDataset::GroundTruthDataset(DatasetSpec spec) : spec_(std::move(spec)) {
  Rng rng(stream_seed(spec_.render_seed, 0x52454e44 /* "REND" */));
  ellipse_minor_ = 0.5 + 0.1 * rng.uniform();
  triangle_base_half_ = 0.55 + 0.1 * rng.uniform();
  offset_x_ = 0.4 * (rng.uniform() - 0.5);
  offset_y_ = 0.4 * (rng.uniform() - 0.5);
}

GroundTruthDataset GroundTruthDataset::build(const DatasetSpec& spec) {
  spec.validate();
  return GroundTruthDataset(spec);
}

void GroundTruthDataset::check_tuple(const FactorTuple& factors) const {
  const auto& card = spec_.factor_space.cardinalities;
  if (factors.values.size() != card.size())
    throw DomainError("factor tuple has " + std::to_string(factors.values.size()) +
                      " entries, expected " + std::to_string(card.size()));
  for (std::size_t k = 0; k < card.size(); ++k)
    if (factors.values[k] < 0 || factors.values[k] >= card[k])
      throw DomainError("factor " + std::to_string(k) + " value " +
                        std::to_string(factors.values[k]) + " out of range");
}

Observation GroundTruthDataset::render(const FactorTuple& factors) const {
  Observation obs{spec_.image_size, spec_.image_size,
                  std::vector<float>(pixels_per_image())};
  render_into(factors, obs.pixels);
  return obs;
}

void GroundTruthDataset::render_into(const FactorTuple& factors, std::span<float> out) const {
  check_tuple(factors);
  if (out.size() != pixels_per_image()) throw DomainError("render target has wrong size");
  const auto& card = spec_.factor_space.cardinalities;
  const auto& v = factors.values;
  const double size = spec_.image_size;
  const double unit = size / 32.0;
  const double max_radius = 7.0 * unit;
  const double radius = lerp_grid(0.5 * max_radius, max_radius, v[kScale], card[kScale]);
  const double margin = max_radius + 1.0 * unit;
  const double cx = lerp_grid(margin, size - margin, v[kPosX], card[kPosX]) + offset_x_ * unit;
  const double cy = lerp_grid(margin, size - margin, v[kPosY], card[kPosY]) + offset_y_ * unit;
  const double theta = v[kOrientation] * (kOrientationSpanDeg / card[kOrientation]) *
                       std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const int shape = v[kShape];

  const Vec2 tri0{1.0, 0.0};
  const Vec2 tri1{-0.7, triangle_base_half_};
  const Vec2 tri2{-0.7, -triangle_base_half_};

  const int n = spec_.image_size;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      // Rotate into the shape frame, then scale to unit size.
      const Vec2 p{(cos_t * dx + sin_t * dy) / radius, (-sin_t * dx + cos_t * dy) / radius};
      double sd = 0.0;
      switch (shape) {
        case 0:
          sd = sd_ellipse(p, 1.0, ellipse_minor_);
          break;
        case 1:
          sd = sd_triangle(p, tri0, tri1, tri2);
          break;
        default:
          sd = sd_heart(Vec2{p.x, p.y + 0.55});
          break;
      }
      const double intensity = std::clamp(0.5 - sd * radius, 0.0, 1.0);
      out[static_cast<std::size_t>(y) * n + x] = static_cast<float>(intensity);
    }
  }
}

std::vector<FactorTuple> GroundTruthDataset::sample_factors(std::size_t n, Rng& rng) const {
  const auto& card = spec_.factor_space.cardinalities;
  std::vector<FactorTuple> out(n);
  for (auto& t : out) {
    t.values.resize(card.size());
    for (std::size_t k = 0; k < card.size(); ++k)
      t.values[k] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(card[k])));
  }
  return out;
}

FixedFactorSample GroundTruthDataset::sample_fixed_factor(std::size_t k, std::size_t n,
                                                          Rng& rng) const {
  const auto& card = spec_.factor_space.cardinalities;
  if (k >= card.size())
    throw DomainError("factor index " + std::to_string(k) + " out of range (K=" +
                      std::to_string(card.size()) + ")");
  FixedFactorSample sample;
  sample.value = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(card[k])));
  sample.tuples = sample_factors(n, rng);
  for (auto& t : sample.tuples) t.values[k] = sample.value;
  return sample;
}

FactorTuple GroundTruthDataset::tuple_at(std::uint64_t index) const {
  const auto& card = spec_.factor_space.cardinalities;
  if (index >= num_configurations()) throw DomainError("configuration index out of range");
  FactorTuple t;
  t.values.resize(card.size());
  for (std::size_t k = card.size(); k-- > 0;) {
    t.values[k] = static_cast<int>(index % static_cast<std::uint64_t>(card[k]));
    index /= static_cast<std::uint64_t>(card[k]);
  }
  return t;
}

std::uint64_t GroundTruthDataset::index_of(const FactorTuple& factors) const {
  check_tuple(factors);
  std::uint64_t index = 0;
  const auto& card = spec_.factor_space.cardinalities;
  for (std::size_t k = 0; k < card.size(); ++k)
    index = index * static_cast<std::uint64_t>(card[k]) + static_cast<std::uint64_t>(factors.values[k]);
  return index;
}

}  // namespace disent
