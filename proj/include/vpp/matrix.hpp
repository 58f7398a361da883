#pragma once

#include <cstddef>
#include <vector>

namespace vpp {

// Dense row-major matrix of doubles; the value type of the autodiff tape.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(std::size_t(r) * c, fill) {}

  double& operator()(int r, int c) { return v[std::size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return v[std::size_t(r) * cols + c]; }
  double* row(int r) { return v.data() + std::size_t(r) * cols; }
  const double* row(int r) const { return v.data() + std::size_t(r) * cols; }
  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

}  // namespace vpp
