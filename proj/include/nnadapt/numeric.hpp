#pragma once

#include <span>
#include <vector>

#include "nnadapt/matrix.hpp"
#include "nnadapt/rng.hpp"

namespace nnadapt {

// Natural log everywhere; 0*log(0) treated as 0.

// Numerically stable softmax. Rejects non-finite input.
std::vector<double> softmax(std::span<const double> v);

// Softmax applied to each row.
RealMatrix softmax_rows(const RealMatrix& logits);

// u.v / (|u||v|). Both vectors must be nonzero and of equal length.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Cosine distance 1 - similarity.
inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
  return 1.0 - cosine_similarity(u, v);
}

// -sum p log p over a probability vector (entries >= 0, sum ~ 1).
double shannon_entropy(std::span<const double> p);

// Middle order statistic; mean of the two middle values for even length.
double median(std::span<const double> xs);

// n i.i.d. draws from Normal(mean, stddev), each clamped to [0, 1].
std::vector<double> sample_normal_clamped(SeededRng& rng, double mean, double stddev, int n);

// VJP of p = softmax(v): given dL/dp for one row, returns dL/dv.
std::vector<double> softmax_vjp(std::span<const double> p, std::span<const double> dp);

}  // namespace nnadapt
