#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nnadapt/geometry.hpp"
#include "nnadapt/matrix.hpp"
#include "nnadapt/model.hpp"
#include "nnadapt/rng.hpp"

namespace nnadapt {

// Full-dataset quantities computed once per epoch and frozen while the
// iteration stage consumes them.
struct AuxiliaryCache {
  RealMatrix Hbar;       // deep features, n_t x d_h
  RealMatrix Bbar;       // bottleneck embeddings, n_t x d_b
  RealMatrix Vbar;       // logits, n_t x K
  RealMatrix Pbar;       // softmax of Vbar
  RealMatrix Qbar;       // centroid similarity logits, n_t x K, entries in [0,1]
  RealMatrix centroids;  // K x d_b
  std::vector<int> pseudo;
  std::vector<Neighborhood> neighbors;
  std::optional<ConfidentSet> confident;
  bool shnnh_fallback = false;  // confident split failed; epoch ran plain NNH
  std::vector<std::string> warnings;
};

struct EpochCacheConfig {
  NeighborMode mode = NeighborMode::Nnh;
  int kmeans_rounds = 1;
  double alpha = 0.85;
  double delta = 0.15;
  bool min_similarity_labels = false;  // argmin instead of argmax of fused scores
  bool min_logit_distance = false;     // centroid distance as min_k q instead of 1-max_k q
  bool use_chain_search = true;        // false: neighbor = nearest confident member
  ConfidentRule confident_rule = ConfidentRule::Intersection;
};

// Eval-mode forward of the whole target set; fills Hbar..Pbar only.
AuxiliaryCache compute_aux(TargetModel& m, const RealMatrix& Xt);

// Round 0: soft weighted means of Bbar under Pbar. Each further round
// reassigns weights one-hot to the nearest centroid (cosine) and recomputes;
// a class emptied by reassignment keeps its previous centroid.
RealMatrix weighted_centroids(const RealMatrix& Bbar, const RealMatrix& Pbar, int rounds,
                              std::vector<std::string>* warnings = nullptr);

// q_{i,k} = (1 + cos(b_i, mu_k)) / 2.
RealMatrix similarity_logits(const RealMatrix& Bbar, const RealMatrix& centroids);

// Per sample: draw a clamped-normal lambda vector, fuse anchor and neighbor
// similarity rows, pick the best class (ties -> lowest).
std::vector<int> fused_pseudo_labels(const RealMatrix& Qbar,
                                     const std::vector<Neighborhood>& neighbors, SeededRng& rng,
                                     double alpha, double delta, bool min_similarity = false);

// One epoch's initialization stage: auxiliary forward, centroids, similarity
// logits, (shnnh) confident split + chain-searched home samples, pseudo-labels.
AuxiliaryCache build_epoch_cache(TargetModel& m, const RealMatrix& Xt, const EpochCacheConfig& cfg,
                                 SeededRng& rng);

}  // namespace nnadapt
