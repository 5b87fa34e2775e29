#include "nnadapt/selflabel.hpp"

#include <cmath>
#include <string>

#include "nnadapt/errors.hpp"
#include "nnadapt/numeric.hpp"

namespace nnadapt {

AuxiliaryCache compute_aux(TargetModel& m, const RealMatrix& Xt) {
  if (m.training) throw NumericError("auxiliary cache must be computed in eval mode");
  AuxiliaryCache cache;
  ForwardTrace tr = forward(m, Xt, ForwardStage::Full);
  cache.Hbar = std::move(tr.h);
  cache.Bbar = std::move(tr.b);
  cache.Vbar = std::move(tr.v);
  cache.Pbar = std::move(tr.p);
  return cache;
}

namespace {

double cosine_to_centroid(const RealMatrix& Bbar, int i, const RealMatrix& mu, int k) {
  double dot = 0.0, nb = 0.0, nm = 0.0;
  for (int c = 0; c < Bbar.cols; ++c) {
    dot += Bbar(i, c) * mu(k, c);
    nb += Bbar(i, c) * Bbar(i, c);
    nm += mu(k, c) * mu(k, c);
  }
  if (nb == 0.0 || nm == 0.0) return -2.0;  // worse than any real cosine
  return dot / std::sqrt(nb * nm);
}

}  // namespace

RealMatrix weighted_centroids(const RealMatrix& Bbar, const RealMatrix& Pbar, int rounds,
                              std::vector<std::string>* warnings) {
  if (Bbar.rows != Pbar.rows) throw NumericError("embedding/probability row count mismatch");
  if (rounds < 0) throw ConfigError("centroid refinement rounds must be non-negative");
  const int n = Bbar.rows, K = Pbar.cols, d = Bbar.cols;

  RealMatrix mu(K, d);
  for (int k = 0; k < K; ++k) {
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) wsum += Pbar(i, k);
    if (wsum <= 0.0)
      throw NumericError("class " + std::to_string(k) + " has zero total weight for centroids");
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += Pbar(i, k) * Bbar(i, c);
      mu(k, c) = s / wsum;
    }
  }

  for (int r = 0; r < rounds; ++r) {
    std::vector<int> assign(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_cos = cosine_to_centroid(Bbar, i, mu, 0);
      for (int k = 1; k < K; ++k) {
        const double c = cosine_to_centroid(Bbar, i, mu, k);
        if (c > best_cos) {
          best = k;
          best_cos = c;
        }
      }
      assign[static_cast<size_t>(i)] = best;
    }
    RealMatrix next(K, d);
    std::vector<int> counts(static_cast<size_t>(K), 0);
    for (int i = 0; i < n; ++i) {
      const int k = assign[static_cast<size_t>(i)];
      ++counts[static_cast<size_t>(k)];
      for (int c = 0; c < d; ++c) next(k, c) += Bbar(i, c);
    }
    for (int k = 0; k < K; ++k) {
      if (counts[static_cast<size_t>(k)] == 0) {
        if (warnings)
          warnings->push_back("centroid round " + std::to_string(r + 1) + ": class " +
                              std::to_string(k) + " empty, keeping previous centroid");
        for (int c = 0; c < d; ++c) next(k, c) = mu(k, c);
      } else {
        for (int c = 0; c < d; ++c) next(k, c) /= counts[static_cast<size_t>(k)];
      }
    }
    mu = std::move(next);
  }
  return mu;
}

RealMatrix similarity_logits(const RealMatrix& Bbar, const RealMatrix& centroids) {
  if (Bbar.cols != centroids.cols) throw NumericError("embedding/centroid width mismatch");
  RealMatrix q(Bbar.rows, centroids.rows);
  for (int i = 0; i < Bbar.rows; ++i) {
    for (int k = 0; k < centroids.rows; ++k) {
      // cosine_similarity rejects zero-norm rows for us
      q(i, k) = 0.5 * (1.0 + cosine_similarity(Bbar.row(i), centroids.row(k)));
    }
  }
  return q;
}

std::vector<int> fused_pseudo_labels(const RealMatrix& Qbar,
                                     const std::vector<Neighborhood>& neighbors, SeededRng& rng,
                                     double alpha, double delta, bool min_similarity) {
  const int n = Qbar.rows, K = Qbar.cols;
  if (static_cast<int>(neighbors.size()) != n)
    throw NumericError("neighborhood list does not cover all samples");
  std::vector<int> neighbor_of(static_cast<size_t>(n), -1);
  for (const auto& nb : neighbors) {
    if (nb.anchor < 0 || nb.anchor >= n || nb.neighbor < 0 || nb.neighbor >= n)
      throw NumericError("neighborhood index out of range");
    neighbor_of[static_cast<size_t>(nb.anchor)] = nb.neighbor;
  }
  for (int i = 0; i < n; ++i)
    if (neighbor_of[static_cast<size_t>(i)] < 0)
      throw NumericError("neighborhood list misses anchor " + std::to_string(i));

  std::vector<int> ybar(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int j = neighbor_of[static_cast<size_t>(i)];
    const std::vector<double> lam = sample_normal_clamped(rng, alpha, delta, K);
    int best = 0;
    double best_score = 0.0;
    for (int k = 0; k < K; ++k) {
      const double l = lam[static_cast<size_t>(k)];
      const double fused = l * Qbar(i, k) + (1.0 - l) * Qbar(j, k);
      const bool better = min_similarity ? (fused < best_score) : (fused > best_score);
      if (k == 0 || better) {
        best = k;
        best_score = fused;
      }
    }
    ybar[static_cast<size_t>(i)] = best;
  }
  return ybar;
}

AuxiliaryCache build_epoch_cache(TargetModel& m, const RealMatrix& Xt, const EpochCacheConfig& cfg,
                                 SeededRng& rng) {
  AuxiliaryCache cache = compute_aux(m, Xt);
  cache.centroids = weighted_centroids(cache.Bbar, cache.Pbar, cfg.kmeans_rounds, &cache.warnings);
  cache.Qbar = similarity_logits(cache.Bbar, cache.centroids);

  const int n = Xt.rows;
  bool shnnh_active = false;
  if (cfg.mode == NeighborMode::Shnnh) {
    try {
      ConfidentSet cs =
          confident_split(cache.Pbar, cache.Qbar, cfg.confident_rule, cfg.min_logit_distance);
      if (cs.count() < 2) {
        cache.warnings.push_back(
            "confident group has fewer than 2 members; falling back to plain neighborhoods");
      } else {
        cache.confident = std::move(cs);
        shnnh_active = true;
      }
    } catch (const NoConfidentSamplesError&) {
      cache.warnings.push_back("confident split empty; falling back to plain neighborhoods");
    }
    cache.shnnh_fallback = !shnnh_active;
  }

  if (shnnh_active) {
    cache.neighbors.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const int home = cfg.use_chain_search
                           ? chain_search(i, cache.Hbar, *cache.confident)
                           : nearest_confident(cache.Hbar.row(i), i, cache.Hbar, *cache.confident);
      cache.neighbors.push_back({i, home, NeighborMode::Shnnh});
    }
  } else {
    cache.neighbors = static_nnh(cache.Hbar);
  }

  cache.pseudo = fused_pseudo_labels(cache.Qbar, cache.neighbors, rng, cfg.alpha, cfg.delta,
                                     cfg.min_similarity_labels);
  return cache;
}

}  // namespace nnadapt
