#include "nnadapt/matrix.hpp"

#include <cmath>

#include "nnadapt/errors.hpp"

namespace nnadapt {

bool RealMatrix::all_finite() const {
  for (double x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

RealMatrix affine(const RealMatrix& a, const RealMatrix& b, std::span<const double> bias) {
  if (a.cols != b.cols) throw NumericError("affine: inner dimensions disagree");
  RealMatrix out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      double s = bias.empty() ? 0.0 : bias[j];
      const double* ar = a.data.data() + static_cast<size_t>(i) * a.cols;
      const double* br = b.data.data() + static_cast<size_t>(j) * b.cols;
      for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b) {
  if (a.cols != b.rows) throw NumericError("matmul: inner dimensions disagree");
  RealMatrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* br = b.data.data() + static_cast<size_t>(k) * b.cols;
      double* orow = out.data.data() + static_cast<size_t>(i) * out.cols;
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * br[j];
    }
  }
  return out;
}

RealMatrix vstack(const RealMatrix& a, const RealMatrix& b) {
  if (a.cols != b.cols) throw NumericError("vstack: column counts disagree");
  RealMatrix out(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

RealMatrix take_rows(const RealMatrix& m, std::span<const int> idx) {
  RealMatrix out(static_cast<int>(idx.size()), m.cols);
  for (size_t i = 0; i < idx.size(); ++i) out.set_row(static_cast<int>(i), m.row(idx[i]));
  return out;
}

}  // namespace nnadapt
