#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace fedclaims {

/// Dense row-major matrix of doubles. All engine arithmetic runs through
/// explicit loops over this type with a fixed accumulation order, which is
/// what makes training trajectories bit-reproducible.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows*cols

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const double& operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Matrix& other) const = default;
};

}  // namespace fedclaims
