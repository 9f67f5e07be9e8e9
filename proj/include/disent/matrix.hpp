#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace disent {

/// Dense row-major matrix.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::vector<T> column(std::size_t c) const {
    std::vector<T> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = data[r * cols + c];
    return out;
  }

  bool empty() const { return data.empty(); }
  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

}  // namespace disent
