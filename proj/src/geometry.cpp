#include "nnadapt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnadapt/numeric.hpp"

namespace nnadapt {

int ConfidentSet::count() const {
  return static_cast<int>(std::count(member.begin(), member.end(), char(1)));
}

int nearest_neighbor(std::span<const double> query, const RealMatrix& pool,
                     const std::vector<char>& excluded, int* skipped_zero_rows) {
  if (static_cast<int>(excluded.size()) != pool.rows)
    throw NumericError("exclusion mask size does not match pool");
  if (static_cast<int>(query.size()) != pool.cols)
    throw NumericError("query width does not match pool");

  double qnorm = 0.0;
  for (double x : query) qnorm += x * x;
  qnorm = std::sqrt(qnorm);
  if (qnorm == 0.0) throw NumericError("nearest-neighbor query has zero norm");

  int best = -1;
  double best_dist = 0.0;
  for (int r = 0; r < pool.rows; ++r) {
    if (excluded[static_cast<size_t>(r)]) continue;
    double dot = 0.0, rnorm = 0.0;
    for (int c = 0; c < pool.cols; ++c) {
      dot += query[static_cast<size_t>(c)] * pool(r, c);
      rnorm += pool(r, c) * pool(r, c);
    }
    if (rnorm == 0.0) {
      if (skipped_zero_rows) ++*skipped_zero_rows;
      continue;
    }
    const double dist = 1.0 - dot / (qnorm * std::sqrt(rnorm));
    if (best < 0 || dist < best_dist) {
      best = r;
      best_dist = dist;
    }
  }
  if (best < 0) throw NumericError("nearest-neighbor search has no admissible pool row");
  return best;
}

std::vector<Neighborhood> static_nnh(const RealMatrix& Hbar) {
  if (Hbar.rows < 2) throw NumericError("static neighborhood needs at least 2 samples");
  std::vector<Neighborhood> out(static_cast<size_t>(Hbar.rows));
  std::vector<char> excl(static_cast<size_t>(Hbar.rows), 0);
  for (int i = 0; i < Hbar.rows; ++i) {
    excl[static_cast<size_t>(i)] = 1;
    out[static_cast<size_t>(i)] = {i, nearest_neighbor(Hbar.row(i), Hbar, excl), NeighborMode::Nnh};
    excl[static_cast<size_t>(i)] = 0;
  }
  return out;
}

Neighborhood dynamical_nnh(std::span<const double> h_current, int anchor, const RealMatrix& Hbar) {
  if (Hbar.rows < 2) throw NumericError("dynamical neighborhood needs at least 2 samples");
  if (anchor < 0 || anchor >= Hbar.rows) throw NumericError("anchor index out of range");
  std::vector<char> excl(static_cast<size_t>(Hbar.rows), 0);
  excl[static_cast<size_t>(anchor)] = 1;
  return {anchor, nearest_neighbor(h_current, Hbar, excl), NeighborMode::Nnh};
}

ConfidentSet confident_split(const RealMatrix& Pbar, const RealMatrix& Qbar, ConfidentRule rule,
                             bool literal_min_distance) {
  if (Pbar.rows != Qbar.rows) throw NumericError("probability/logit row count mismatch");
  const int n = Pbar.rows;
  if (n < 1) throw NumericError("confident split needs at least one sample");

  std::vector<double> ent(static_cast<size_t>(n)), dist(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    ent[static_cast<size_t>(i)] = shannon_entropy(Pbar.row(i));
    auto q = Qbar.row(i);
    if (literal_min_distance) {
      double mn = q[0];
      for (size_t k = 1; k < q.size(); ++k) mn = std::min(mn, q[k]);
      dist[static_cast<size_t>(i)] = mn;
    } else {
      double mx = q[0];
      for (size_t k = 1; k < q.size(); ++k) mx = std::max(mx, q[k]);
      dist[static_cast<size_t>(i)] = 1.0 - mx;
    }
  }

  ConfidentSet cs;
  cs.gamma_e = median(ent);
  cs.gamma_d = median(dist);
  cs.member.assign(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const bool in_e = ent[static_cast<size_t>(i)] < cs.gamma_e;
    const bool in_d = dist[static_cast<size_t>(i)] < cs.gamma_d;
    bool in = false;
    switch (rule) {
      case ConfidentRule::Intersection: in = in_e && in_d; break;
      case ConfidentRule::EntropyOnly: in = in_e; break;
      case ConfidentRule::DistanceOnly: in = in_d; break;
    }
    cs.member[static_cast<size_t>(i)] = in ? 1 : 0;
  }
  if (cs.count() == 0) throw NoConfidentSamplesError();
  return cs;
}

int chain_search_from(std::span<const double> query, int anchor, const RealMatrix& Hbar,
                      const ConfidentSet& confident) {
  const int n = Hbar.rows;
  if (n < 2) throw NumericError("chain search needs at least 2 samples");
  if (static_cast<int>(confident.member.size()) != n)
    throw NumericError("confident set size does not match pool");
  if (confident.count() == 0) throw NoConfidentSamplesError();

  std::vector<char> visited(static_cast<size_t>(n), 0);
  if (anchor >= 0 && anchor < n) visited[static_cast<size_t>(anchor)] = 1;

  int guiding = nearest_neighbor(query, Hbar, visited);
  visited[static_cast<size_t>(guiding)] = 1;
  int steps = 1;
  while (!confident.member[static_cast<size_t>(guiding)]) {
    if (steps >= n)
      throw NumericError("chain search exhausted the pool without a confident member");
    guiding = nearest_neighbor(Hbar.row(guiding), Hbar, visited);
    visited[static_cast<size_t>(guiding)] = 1;
    ++steps;
  }
  return guiding;
}

int chain_search(int start, const RealMatrix& Hbar, const ConfidentSet& confident) {
  if (start < 0 || start >= Hbar.rows) throw NumericError("chain start index out of range");
  return chain_search_from(Hbar.row(start), start, Hbar, confident);
}

int nearest_confident(std::span<const double> query, int anchor, const RealMatrix& Hbar,
                      const ConfidentSet& confident) {
  const int n = Hbar.rows;
  if (static_cast<int>(confident.member.size()) != n)
    throw NumericError("confident set size does not match pool");
  std::vector<char> excl(static_cast<size_t>(n), 0);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    const bool keep = confident.member[static_cast<size_t>(i)] && i != anchor;
    excl[static_cast<size_t>(i)] = keep ? 0 : 1;
    any = any || keep;
  }
  if (!any) throw NoConfidentSamplesError();
  return nearest_neighbor(query, Hbar, excl);
}

}  // namespace nnadapt
