#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nnadapt/model.hpp"
#include "nnadapt/selflabel.hpp"

namespace nnadapt {

struct AdaptConfig {
  double beta = 0.2;       // self-supervised loss weight in the joint objective
  double alpha = 0.85;     // fusion lambda distribution location
  double delta = 0.15;     // fusion lambda distribution spread
  double omega_i = 0.5;    // anchor weight in probability fusion
  double omega_in = 0.5;   // neighbor weight in probability fusion
  double eta_i = 0.5;      // anchor weight in the self-supervised loss
  double eta_in = 0.5;     // neighbor weight in the self-supervised loss
  int max_epochs = 15;
  int iters_per_epoch = 0;  // 0 -> ceil(n_t / batch)
  int batch = 64;
  double lr = 0.02;
  double momentum = 0.9;
  double lr_decay = 1.0;
  NeighborMode mode = NeighborMode::Nnh;
  uint64_t seed = 2020;
  bool use_im = true;                  // false: objective = beta * ss only
  bool min_similarity_labels = false;  // pick least-similar fused class (literal variant)
  bool min_logit_distance = false;     // centroid distance as min_k q (literal variant)
  bool use_chain_search = true;
  ConfidentRule confident_rule = ConfidentRule::Intersection;
  int kmeans_rounds = 1;

  void validate() const;  // throws ConfigError
  EpochCacheConfig cache_config() const;
};

struct ObjectiveResult {
  double total = 0.0, im = 0.0, ss = 0.0;
  Gradients grads;
};

struct AdaptHistoryRow {
  int epoch = 0;
  double total = 0.0, im = 0.0, ss = 0.0;
  double pseudo_accuracy = -1.0;  // -1 when no truth labels supplied
  double target_accuracy = -1.0;
};

struct AdaptResult {
  TargetModel model;
  std::vector<AdaptHistoryRow> history;
  bool aborted = false;
  std::string message;
};

// Elementwise omega_i * P_i + omega_in * P_in; deliberately not renormalized.
RealMatrix fuse_probs(const RealMatrix& P_i, const RealMatrix& P_in, double omega_i,
                      double omega_in);

// Mean per-row entropy plus signed marginal-entropy term: fused rows that are
// individually confident but collectively diverse minimize this.
double im_loss(const RealMatrix& fused);

// eta_i * CE(P_i, ybar) + eta_in * CE(P_in, ybar): both neighborhood members
// are supervised by the anchor's pseudo-label.
double ss_loss(const RealMatrix& P_i, const RealMatrix& P_in, const std::vector<int>& ybar,
               double eta_i, double eta_in);

// One batch of the joint loss and its analytic gradients w.r.t. extractor and
// bottleneck (classifier frozen). Anchor rows go through the live extractor;
// each anchor's neighbor is re-searched against the frozen cache and its
// cached deep feature goes through the live bottleneck+classifier alongside.
ObjectiveResult objective(const std::vector<int>& batch_idx, const RealMatrix& Xt,
                          const AuxiliaryCache& cache, TargetModel& m, const AdaptConfig& cfg);

// Epoch loop: rebuild the cache, then iterate batched objective + SGD steps.
// Truth labels, when given, are used for reporting only.
AdaptResult adapt_loop(const TargetModel& source_model, const RealMatrix& Xt,
                       const AdaptConfig& cfg,
                       const std::vector<int>* truth_labels = nullptr);

// Plain eval-mode argmax prediction; no neighborhoods involved.
std::vector<int> predict(TargetModel& m, const RealMatrix& X);

void save_history(const std::vector<AdaptHistoryRow>& history, const std::string& path);

}  // namespace nnadapt
