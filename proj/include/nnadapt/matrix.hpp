#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nnadapt {

// Dense row-major matrix of doubles. The single container for feature
// batches, probabilities, logits and parameter blocks.
struct RealMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  std::span<double> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }

  void set_row(int r, std::span<const double> v) {
    for (int c = 0; c < cols; ++c) (*this)(r, c) = v[c];
  }

  bool same_shape(const RealMatrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const;
};

// out = a * b^T + bias (bias per output column, may be empty).
// a: n x k, b: m x k, out: n x m.
RealMatrix affine(const RealMatrix& a, const RealMatrix& b, std::span<const double> bias);

// out = a * b where b is m x k, a is n x m.
RealMatrix matmul(const RealMatrix& a, const RealMatrix& b);

// Stack b below a (equal column counts).
RealMatrix vstack(const RealMatrix& a, const RealMatrix& b);

RealMatrix take_rows(const RealMatrix& m, std::span<const int> idx);

}  // namespace nnadapt
