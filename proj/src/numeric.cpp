#include "nnadapt/numeric.hpp"

#include <algorithm>
#include <cmath>

#include "nnadapt/errors.hpp"

namespace nnadapt {

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw NumericError("softmax: empty input");
  double mx = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("softmax: non-finite input");
    mx = std::max(mx, x);
  }
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

RealMatrix softmax_rows(const RealMatrix& logits) {
  RealMatrix out(logits.rows, logits.cols);
  for (int i = 0; i < logits.rows; ++i) out.set_row(i, softmax(logits.row(i)));
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw NumericError("cosine_similarity: length mismatch");
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw NumericError("cosine_similarity: zero vector");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

double shannon_entropy(std::span<const double> p) {
  if (p.empty()) throw NumericError("shannon_entropy: empty input");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw NumericError("shannon_entropy: negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw NumericError("shannon_entropy: entries do not sum to 1");
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

double median(std::span<const double> xs) {
  if (xs.empty()) throw NumericError("median: empty input");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  size_t n = s.size();
  if (n % 2 == 1) return s[n / 2];
  return 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

std::vector<double> sample_normal_clamped(SeededRng& rng, double mean, double stddev, int n) {
  if (stddev < 0.0) throw NumericError("sample_normal_clamped: negative stddev");
  std::vector<double> out(static_cast<size_t>(n));
  for (double& x : out) x = std::clamp(rng.normal(mean, stddev), 0.0, 1.0);
  return out;
}

std::vector<double> softmax_vjp(std::span<const double> p, std::span<const double> dp) {
  double s = 0.0;
  for (size_t k = 0; k < p.size(); ++k) s += dp[k] * p[k];
  std::vector<double> dv(p.size());
  for (size_t k = 0; k < p.size(); ++k) dv[k] = p[k] * (dp[k] - s);
  return dv;
}

}  // namespace nnadapt
