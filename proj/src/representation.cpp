#include "disent/representation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "disent/errors.hpp"

namespace disent {

void RepresentationMatrix::validate() const {
  if (codes.rows != factors.rows)
    throw DomainError("codes and factors have different row counts");
  if (codes.rows == 0) throw DomainError("empty representation");
  if (codes.cols == 0) throw DomainError("representation has no latent dimensions");
  if (factors.cols != factor_space.size())
    throw DomainError("factor columns do not match the factor space");
  for (double v : codes.data)
    if (!std::isfinite(v)) throw DomainError("representation contains non-finite codes");
  for (std::size_t i = 0; i < factors.rows; ++i)
    for (std::size_t k = 0; k < factors.cols; ++k) {
      const int v = factors(i, k);
      if (v < 0 || v >= factor_space.cardinalities[k])
        throw DomainError("factor value out of range in row " + std::to_string(i));
    }
}

RepresentationMatrix identity_representation(const FactorSpace& space,
                                             const std::vector<FactorTuple>& tuples) {
  RepresentationMatrix rep;
  rep.factor_space = space;
  rep.codes = MatrixD(tuples.size(), space.size());
  rep.factors = Matrix<int>(tuples.size(), space.size());
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    if (tuples[i].values.size() != space.size()) throw DomainError("tuple arity mismatch");
    for (std::size_t k = 0; k < space.size(); ++k) {
      rep.factors(i, k) = tuples[i].values[k];
      rep.codes(i, k) = tuples[i].values[k];
    }
  }
  return rep;
}

std::vector<FactorTuple> full_grid(const GroundTruthDataset& dataset) {
  const auto n = dataset.num_configurations();
  std::vector<FactorTuple> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(dataset.tuple_at(i));
  return out;
}

namespace {

constexpr std::size_t kEncodeChunk = 256;

std::uint64_t image_hash(std::span<const float> pixels) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (float v : pixels) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 4; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace

MatrixD encode_tuples(const Encoder& encoder, const GroundTruthDataset& dataset,
                      const std::vector<FactorTuple>& tuples) {
  const std::size_t d = encoder.latent_dim();
  MatrixD codes(tuples.size(), d);
  MatrixF x;
  for (std::size_t start = 0; start < tuples.size(); start += kEncodeChunk) {
    const std::size_t rows = std::min(kEncodeChunk, tuples.size() - start);
    x = MatrixF(rows, dataset.pixels_per_image());
    for (std::size_t i = 0; i < rows; ++i) dataset.render_into(tuples[start + i], x.row(i));
    const MatrixD mu = encoder.encode_mean(x);
    if (mu.rows != rows || mu.cols != d) throw DomainError("encoder returned the wrong shape");
    std::copy(mu.data.begin(), mu.data.end(), codes.data.begin() + static_cast<long>(start * d));
  }
  return codes;
}

RepresentationMatrix encode_dataset(const Encoder& encoder, const GroundTruthDataset& dataset,
                                    std::size_t n, Rng& rng) {
  if (n == 0) throw DomainError("encode_dataset needs n >= 1");
  const auto tuples = dataset.sample_factors(n, rng);
  RepresentationMatrix rep;
  rep.codes = encode_tuples(encoder, dataset, tuples);
  rep.factor_space = dataset.factors();
  rep.factors = Matrix<int>(n, dataset.factors().size());
  for (std::size_t i = 0; i < n; ++i)
    std::copy(tuples[i].values.begin(), tuples[i].values.end(), rep.factors.row(i).begin());
  return rep;
}

FactorLookupEncoder::FactorLookupEncoder(const GroundTruthDataset& dataset) : dataset_(dataset) {
  std::vector<float> pixels(dataset.pixels_per_image());
  const auto n = dataset.num_configurations();
  index_.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    dataset.render_into(dataset.tuple_at(i), pixels);
    index_.emplace(image_hash(pixels), i);
  }
}

MatrixD FactorLookupEncoder::encode_mean(const MatrixF& images) const {
  if (images.cols != dataset_.pixels_per_image()) throw DomainError("image size mismatch");
  const std::size_t k = latent_dim();
  MatrixD out(images.rows, k);
  std::vector<float> candidate(images.cols);
  for (std::size_t r = 0; r < images.rows; ++r) {
    const auto row = images.row(r);
    auto [lo, hi] = index_.equal_range(image_hash(row));
    bool found = false;
    for (auto it = lo; it != hi && !found; ++it) {
      const FactorTuple t = dataset_.tuple_at(it->second);
      dataset_.render_into(t, candidate);
      if (!std::equal(candidate.begin(), candidate.end(), row.begin())) continue;
      for (std::size_t j = 0; j < k; ++j) out(r, j) = t.values[j];
      found = true;
    }
    if (!found) throw DomainError("image is not a rendering of the dataset");
  }
  return out;
}

MatrixD ConstantEncoder::encode_mean(const MatrixF& images) const {
  MatrixD out(images.rows, code_.size());
  for (std::size_t r = 0; r < images.rows; ++r) std::copy(code_.begin(), code_.end(), out.row(r).begin());
  return out;
}

RepresentationMatrix read_representation_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty representation CSV " + path.string());
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      header.push_back(cell);
    }
  }
  std::size_t d = 0, k = 0;
  for (const auto& h : header) {
    if (h == "z" + std::to_string(d) && k == 0) ++d;
    else if (h == "f" + std::to_string(k)) ++k;
    else throw SchemaError("representation CSV header must be z0..z{d-1},f0..f{K-1}; got '" + h + "'");
  }
  if (d == 0 || k == 0) throw SchemaError("representation CSV needs at least one z and one f column");

  std::vector<double> codes;
  std::vector<int> factors;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        if (col < d) {
          codes.push_back(std::stod(cell, &used));
        } else {
          const double v = std::stod(cell, &used);
          if (v != std::floor(v)) throw std::invalid_argument(cell);
          factors.push_back(static_cast<int>(v));
        }
      } catch (const std::exception&) {
        throw SchemaError("bad value '" + cell + "' in row " + std::to_string(rows + 1));
      }
      ++col;
    }
    if (col != d + k) throw SchemaError("row " + std::to_string(rows + 1) + " has wrong arity");
    ++rows;
  }
  RepresentationMatrix rep;
  rep.codes = MatrixD(rows, d);
  rep.factors = Matrix<int>(rows, k);
  std::copy(codes.begin(), codes.end(), rep.codes.data.begin());
  std::copy(factors.begin(), factors.end(), rep.factors.data.begin());
  rep.factor_space.cardinalities.assign(k, 0);
  for (std::size_t j = 0; j < k; ++j) {
    rep.factor_space.names.push_back("f" + std::to_string(j));
    for (std::size_t i = 0; i < rows; ++i)
      rep.factor_space.cardinalities[j] = std::max(rep.factor_space.cardinalities[j], rep.factors(i, j) + 1);
  }
  rep.validate();
  return rep;
}

void write_representation_csv(const RepresentationMatrix& rep, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < rep.latent_dim(); ++j) out << (j ? "," : "") << 'z' << j;
  for (std::size_t j = 0; j < rep.num_factors(); ++j) out << ",f" << j;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < rep.size(); ++i) {
    for (std::size_t j = 0; j < rep.latent_dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", rep.codes(i, j));
      out << (j ? "," : "") << buf;
    }
    for (std::size_t j = 0; j < rep.num_factors(); ++j) out << ',' << rep.factors(i, j);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace disent
