#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nnadapt/errors.hpp"
#include "nnadapt/numeric.hpp"
#include "nnadapt/rng.hpp"

using namespace nnadapt;

TEST_CASE("rng: identical seed gives identical draw sequence") {
  SeededRng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  SeededRng c(123), d(123);
  for (int i = 0; i < 100; ++i) CHECK(c.normal(0.0, 1.0) == d.normal(0.0, 1.0));
}

TEST_CASE("rng: uniform01 stays in [0,1)") {
  SeededRng rng(7);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("rng: shuffle is a permutation") {
  SeededRng rng(42);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("rng: derived children are stable and independent of parent consumption") {
  SeededRng a(99);
  uint64_t child_seed = a.derive("phase").seed();
  a.next_u64();
  a.next_u64();
  CHECK(a.derive("phase").seed() == child_seed);  // derivation ignores consumption
  CHECK(a.derive("other").seed() != child_seed);
}

TEST_CASE("rng: normal has roughly the requested moments") {
  SeededRng rng(2020);
  const int n = 50000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal(3.0, 2.0);
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(3.0).epsilon(0.02));
  CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("softmax: symmetric and uniform cases") {
  auto p = softmax(std::vector<double>{1.0, 1.0});
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));

  auto q = softmax(std::vector<double>{0.0, 0.0, 0.0, 0.0});
  for (double x : q) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax: shift invariance and unit sum") {
  SeededRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(6), shifted(6);
    for (int i = 0; i < 6; ++i) {
      v[i] = rng.uniform(-50.0, 50.0);
      shifted[i] = v[i] + 17.25;
    }
    auto p = softmax(v), ps = softmax(shifted);
    double sum = 0.0;
    for (int i = 0; i < 6; ++i) {
      CHECK(p[i] == doctest::Approx(ps[i]).epsilon(1e-9));
      sum += p[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax: rejects non-finite input") {
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), NumericError);
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, INFINITY}), NumericError);
}

TEST_CASE("cosine similarity: identity, orthogonal, antipodal") {
  std::vector<double> u{3.0, 4.0};
  CHECK(cosine_similarity(u, u) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  std::vector<double> nu{-3.0, -4.0};
  CHECK(cosine_similarity(u, nu) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity: zero vector rejected, symmetric, scale invariant") {
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0}),
                  NumericError);
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> u(4), v(4), u3(4), v7(4);
    for (int i = 0; i < 4; ++i) {
      u[i] = rng.normal(0.0, 1.0);
      v[i] = rng.normal(0.0, 1.0);
      u3[i] = 3.0 * u[i];
      v7[i] = 0.7 * v[i];
    }
    double s = cosine_similarity(u, v);
    CHECK(s == doctest::Approx(cosine_similarity(v, u)).epsilon(1e-12));
    CHECK(s == doctest::Approx(cosine_similarity(u3, v7)).epsilon(1e-9));
    CHECK(s >= -1.0 - 1e-12);
    CHECK(s <= 1.0 + 1e-12);
  }
}

TEST_CASE("entropy: uniform, one-hot, binary") {
  CHECK(shannon_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(shannon_entropy(std::vector<double>{0.0, 1.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(shannon_entropy(std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("entropy: rejects negatives, bounded by log length") {
  CHECK_THROWS_AS(shannon_entropy(std::vector<double>{1.2, -0.2}), NumericError);
  SeededRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> raw(5);
    for (int i = 0; i < 5; ++i) raw[i] = rng.uniform(-3.0, 3.0);
    auto p = softmax(raw);
    CHECK(shannon_entropy(p) <= std::log(5.0) + 1e-12);
    CHECK(shannon_entropy(p) >= 0.0);
  }
}

TEST_CASE("median: odd, even, singleton, permutation invariant") {
  CHECK(median(std::vector<double>{3.0, 1.0, 2.0}) == doctest::Approx(2.0));
  CHECK(median(std::vector<double>{1.0, 2.0, 3.0, 4.0}) == doctest::Approx(2.5));
  CHECK(median(std::vector<double>{7.0}) == doctest::Approx(7.0));
  CHECK_THROWS_AS(median(std::vector<double>{}), NumericError);

  SeededRng rng(8);
  std::vector<double> xs(9);
  for (int i = 0; i < 9; ++i) xs[i] = rng.uniform(0.0, 10.0);
  double m = median(xs);
  std::vector<int> idx(9);
  for (int i = 0; i < 9; ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<double> shuffled(9);
  for (int i = 0; i < 9; ++i) shuffled[i] = xs[idx[i]];
  CHECK(median(shuffled) == doctest::Approx(m).epsilon(1e-15));
}

namespace {

double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// E[clamp(X,0,1)] for X ~ N(mean, std), by Simpson quadrature of the interior
// plus the exact mass of the upper clamp.
double clamped_mean_quadrature(double mean, double stddev) {
  const int steps = 20000;  // even
  const double h = 1.0 / steps;
  double integral = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = i * h;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    integral += w * x * std_normal_pdf((x - mean) / stddev) / stddev;
  }
  integral *= h / 3.0;
  const double upper_mass = 1.0 - std_normal_cdf((1.0 - mean) / stddev);
  return integral + upper_mass;  // lower clamp contributes 0
}

}  // namespace

TEST_CASE("clamped normal draws: deterministic, clamped, mean matches quadrature") {
  SeededRng a(77), b(77);
  auto va = sample_normal_clamped(a, 0.85, 0.15, 100);
  auto vb = sample_normal_clamped(b, 0.85, 0.15, 100);
  CHECK(va == vb);
  for (double x : va) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }

  // degenerate spread pins the draw at the clamped mean
  SeededRng c(1);
  for (double x : sample_normal_clamped(c, 1.3, 0.0, 10)) CHECK(x == 1.0);
  for (double x : sample_normal_clamped(c, -0.5, 0.0, 10)) CHECK(x == 0.0);

  SeededRng rng(2020);
  auto draws = sample_normal_clamped(rng, 0.85, 0.15, 100000);
  double mc = 0.0;
  for (double x : draws) mc += x;
  mc /= draws.size();
  const double analytic = clamped_mean_quadrature(0.85, 0.15);
  CHECK(std::abs(mc - analytic) < 0.005);
}

TEST_CASE("softmax vjp matches central finite differences") {
  SeededRng rng(13);
  const int K = 5;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> v(K), dp(K);
    for (int i = 0; i < K; ++i) {
      v[i] = rng.uniform(-2.0, 2.0);
      dp[i] = rng.uniform(-1.0, 1.0);
    }
    auto p = softmax(v);
    auto dv = softmax_vjp(p, dp);
    const double h = 1e-6;
    for (int k = 0; k < K; ++k) {
      auto vp = v, vm = v;
      vp[k] += h;
      vm[k] -= h;
      auto pp = softmax(vp), pm = softmax(vm);
      double fd = 0.0;
      for (int j = 0; j < K; ++j) fd += dp[j] * (pp[j] - pm[j]) / (2.0 * h);
      CHECK(dv[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}
