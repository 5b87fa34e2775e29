#pragma once

#include <span>
#include <vector>

#include "nnadapt/errors.hpp"
#include "nnadapt/matrix.hpp"

namespace nnadapt {

enum class NeighborMode { Nnh, Shnnh };

struct Neighborhood {
  int anchor = -1;
  int neighbor = -1;
  NeighborMode mode = NeighborMode::Nnh;
};

// Which score(s) gate membership in the confident group.
enum class ConfidentRule { Intersection, EntropyOnly, DistanceOnly };

struct ConfidentSet {
  std::vector<char> member;  // one flag per target sample
  double gamma_e = 0.0;      // median prediction entropy
  double gamma_d = 0.0;      // median centroid distance
  int count() const;
};

// Raised when the confident group comes out empty; callers fall back to
// plain nearest-neighbor geometry for the epoch.
struct NoConfidentSamplesError : NumericError {
  NoConfidentSamplesError() : NumericError("no confident samples") {}
};

// Index of the pool row minimizing cosine distance to the query, skipping
// excluded rows; ties broken by lowest index. Zero-norm pool rows are skipped
// and counted into *skipped_zero_rows when provided.
int nearest_neighbor(std::span<const double> query, const RealMatrix& pool,
                     const std::vector<char>& excluded, int* skipped_zero_rows = nullptr);

// One neighborhood per row of Hbar, each paired with its nearest other row.
std::vector<Neighborhood> static_nnh(const RealMatrix& Hbar);

// Neighbor search for a live feature vector; the anchor's own cached row is
// always excluded, even when h_current equals it.
Neighborhood dynamical_nnh(std::span<const double> h_current, int anchor, const RealMatrix& Hbar);

// Split by strict-below-median prediction entropy and strict-below-median
// distance to the nearest centroid. Default distance is 1 - max_k Qbar_{i,k};
// literal_min_distance switches to min_k Qbar_{i,k} instead.
ConfidentSet confident_split(const RealMatrix& Pbar, const RealMatrix& Qbar,
                             ConfidentRule rule = ConfidentRule::Intersection,
                             bool literal_min_distance = false);

// Walk nearest-neighbor links from the start sample until the current guiding
// sample lands in the confident set; returns that member. The start sample is
// never returned (it joins the visited set before the first hop).
int chain_search(int start, const RealMatrix& Hbar, const ConfidentSet& confident);

// Chain search seeded from a live feature vector instead of a cached row.
int chain_search_from(std::span<const double> query, int anchor, const RealMatrix& Hbar,
                      const ConfidentSet& confident);

// Nearest confident member directly (no chaining); the no-chain variant.
int nearest_confident(std::span<const double> query, int anchor, const RealMatrix& Hbar,
                      const ConfidentSet& confident);

}  // namespace nnadapt
