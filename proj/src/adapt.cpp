#include "nnadapt/adapt.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "nnadapt/batching.hpp"
#include "nnadapt/errors.hpp"
#include "nnadapt/numeric.hpp"

namespace nnadapt {

void AdaptConfig::validate() const {
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  if (omega_i + omega_in <= 0.0) throw ConfigError("fusion weights must have positive sum");
  if (omega_i < 0.0 || omega_in < 0.0) throw ConfigError("fusion weights must be non-negative");
  if (eta_i < 0.0 || eta_in < 0.0) throw ConfigError("loss weights must be non-negative");
  if (batch < 2) throw ConfigError("batch size must be at least 2");
  if (max_epochs < 0) throw ConfigError("max epochs must be non-negative");
  if (iters_per_epoch < 0) throw ConfigError("iterations per epoch must be non-negative");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (kmeans_rounds < 0 || kmeans_rounds > 5)
    throw ConfigError("centroid refinement rounds must be in 0..5");
  if (delta < 0.0) throw ConfigError("delta must be non-negative");
}

EpochCacheConfig AdaptConfig::cache_config() const {
  EpochCacheConfig cc;
  cc.mode = mode;
  cc.kmeans_rounds = kmeans_rounds;
  cc.alpha = alpha;
  cc.delta = delta;
  cc.min_similarity_labels = min_similarity_labels;
  cc.min_logit_distance = min_logit_distance;
  cc.use_chain_search = use_chain_search;
  cc.confident_rule = confident_rule;
  return cc;
}

RealMatrix fuse_probs(const RealMatrix& P_i, const RealMatrix& P_in, double omega_i,
                      double omega_in) {
  if (!P_i.same_shape(P_in)) throw NumericError("fusion inputs have mismatched shapes");
  RealMatrix out(P_i.rows, P_i.cols);
  for (size_t idx = 0; idx < out.data.size(); ++idx)
    out.data[idx] = omega_i * P_i.data[idx] + omega_in * P_in.data[idx];
  return out;
}

double im_loss(const RealMatrix& fused) {
  const int n = fused.rows, K = fused.cols;
  if (n < 1) throw NumericError("empty batch in entropy loss");
  double ent = 0.0;
  std::vector<double> marginal(static_cast<size_t>(K), 0.0);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int k = 0; k < K; ++k) {
      const double p = fused(i, k);
      if (p < 0.0) throw NumericError("negative probability in entropy loss");
      row_sum += p;
      ent -= p * std::log(std::max(p, 1e-12));
      marginal[static_cast<size_t>(k)] += p;
    }
    if (row_sum <= 0.0) throw NumericError("fused row has non-positive sum");
  }
  ent /= n;
  double div = 0.0;
  for (int k = 0; k < K; ++k) {
    const double rho = marginal[static_cast<size_t>(k)] / n;
    div += rho * std::log(std::max(rho, 1e-12));
  }
  return ent + div;
}

double ss_loss(const RealMatrix& P_i, const RealMatrix& P_in, const std::vector<int>& ybar,
               double eta_i, double eta_in) {
  if (!P_i.same_shape(P_in)) throw NumericError("loss inputs have mismatched shapes");
  const int n = P_i.rows;
  if (static_cast<int>(ybar.size()) != n) throw NumericError("pseudo-label length mismatch");
  double ce_i = 0.0, ce_in = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = ybar[static_cast<size_t>(i)];
    if (y < 0 || y >= P_i.cols) throw NumericError("pseudo-label out of range");
    ce_i -= std::log(std::max(P_i(i, y), 1e-12));
    ce_in -= std::log(std::max(P_in(i, y), 1e-12));
  }
  return eta_i * ce_i / n + eta_in * ce_in / n;
}

ObjectiveResult objective(const std::vector<int>& batch_idx, const RealMatrix& Xt,
                          const AuxiliaryCache& cache, TargetModel& m, const AdaptConfig& cfg) {
  const int B = static_cast<int>(batch_idx.size());
  if (B < 2) throw NumericError("objective needs a batch of at least 2 anchors");
  if (!m.classifier_frozen) throw NumericError("classifier must be frozen during adaptation");
  const int K = m.num_classes;

  m.set_train();
  const RealMatrix xb = take_rows(Xt, batch_idx);
  ForwardTrace anchor_tr = forward(m, xb, ForwardStage::UpToH);

  // per-anchor dynamic neighbor against the frozen deep-feature cache
  const bool shnnh = cfg.mode == NeighborMode::Shnnh && !cache.shnnh_fallback && cache.confident;
  std::vector<int> nbr(static_cast<size_t>(B));
  for (int i = 0; i < B; ++i) {
    const int anchor = batch_idx[static_cast<size_t>(i)];
    const auto h_now = anchor_tr.h.row(i);
    if (shnnh) {
      nbr[static_cast<size_t>(i)] =
          cfg.use_chain_search
              ? chain_search_from(h_now, anchor, cache.Hbar, *cache.confident)
              : nearest_confident(h_now, anchor, cache.Hbar, *cache.confident);
    } else {
      nbr[static_cast<size_t>(i)] = dynamical_nnh(h_now, anchor, cache.Hbar).neighbor;
    }
  }

  // anchors (live) and neighbors (cached) share one head pass and its
  // batch statistics
  RealMatrix head_in = vstack(anchor_tr.h, take_rows(cache.Hbar, nbr));
  ForwardTrace head_tr = forward_head(m, head_in);

  RealMatrix P_i(B, K), P_in(B, K);
  for (int i = 0; i < B; ++i)
    for (int k = 0; k < K; ++k) {
      P_i(i, k) = head_tr.p(i, k);
      P_in(i, k) = head_tr.p(B + i, k);
    }

  std::vector<int> ybar(static_cast<size_t>(B));
  for (int i = 0; i < B; ++i)
    ybar[static_cast<size_t>(i)] = cache.pseudo[static_cast<size_t>(batch_idx[static_cast<size_t>(i)])];

  const RealMatrix fused = fuse_probs(P_i, P_in, cfg.omega_i, cfg.omega_in);
  ObjectiveResult res;
  res.im = im_loss(fused);
  res.ss = ss_loss(P_i, P_in, ybar, cfg.eta_i, cfg.eta_in);
  res.total = (cfg.use_im ? res.im : 0.0) + cfg.beta * res.ss;

  // dL/dfused_{i,k} = (1/B)(log rho_k - log fused_{i,k}); fused entries are
  // strictly positive (softmax outputs with non-negative weights of positive sum)
  std::vector<double> log_rho(static_cast<size_t>(K), 0.0);
  for (int k = 0; k < K; ++k) {
    double s = 0.0;
    for (int i = 0; i < B; ++i) s += fused(i, k);
    log_rho[static_cast<size_t>(k)] = std::log(std::max(s / B, 1e-12));
  }

  RealMatrix dP(2 * B, K);
  for (int i = 0; i < B; ++i) {
    const int y = ybar[static_cast<size_t>(i)];
    for (int k = 0; k < K; ++k) {
      double d_im = 0.0;
      if (cfg.use_im) {
        const double dfused =
            (log_rho[static_cast<size_t>(k)] - std::log(std::max(fused(i, k), 1e-12))) / B;
        d_im = dfused;
      }
      double d_ss_i = 0.0, d_ss_in = 0.0;
      if (k == y) {
        d_ss_i = -cfg.eta_i / (B * std::max(P_i(i, k), 1e-12));
        d_ss_in = -cfg.eta_in / (B * std::max(P_in(i, k), 1e-12));
      }
      dP(i, k) = cfg.omega_i * d_im + cfg.beta * d_ss_i;
      dP(B + i, k) = cfg.omega_in * d_im + cfg.beta * d_ss_in;
    }
  }

  // through the softmax, rowwise
  RealMatrix dlogits(2 * B, K);
  for (int r = 0; r < 2 * B; ++r) {
    const std::vector<double> dv = softmax_vjp(head_tr.p.row(r), dP.row(r));
    for (int k = 0; k < K; ++k) dlogits(r, k) = dv[static_cast<size_t>(k)];
  }

  res.grads = zero_gradients(m);
  RealMatrix d_head_in;
  backward_head(m, head_tr, dlogits, res.grads, d_head_in);

  // only the anchor half flows back into the extractor; neighbor rows are
  // cached constants
  RealMatrix d_h(B, d_head_in.cols);
  for (int i = 0; i < B; ++i)
    for (int c = 0; c < d_h.cols; ++c) d_h(i, c) = d_head_in(i, c);
  backward_extractor(m, anchor_tr, d_h, res.grads);
  return res;
}

std::vector<int> predict(TargetModel& m, const RealMatrix& X) {
  m.set_eval();
  ForwardTrace tr = forward(m, X, ForwardStage::Full);
  std::vector<int> out(static_cast<size_t>(X.rows));
  for (int i = 0; i < tr.p.rows; ++i) {
    int best = 0;
    for (int k = 1; k < tr.p.cols; ++k)
      if (tr.p(i, k) > tr.p(i, best)) best = k;
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

namespace {

double label_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  int hits = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hits;
  return pred.empty() ? 0.0 : static_cast<double>(hits) / pred.size();
}

}  // namespace

AdaptResult adapt_loop(const TargetModel& source_model, const RealMatrix& Xt,
                       const AdaptConfig& cfg, const std::vector<int>* truth_labels) {
  cfg.validate();
  if (Xt.cols != source_model.in_dim)
    throw ConfigError("target feature width does not match source checkpoint");
  if (truth_labels && static_cast<int>(truth_labels->size()) != Xt.rows)
    throw ConfigError("truth label count does not match target data");
  const int n = Xt.rows;
  if (n < 2) throw ConfigError("adaptation needs at least 2 target samples");

  AdaptResult res;
  res.model = source_model;
  res.model.classifier_frozen = true;  // hypothesis transfer: head stays fixed
  res.model.set_eval();
  if (cfg.max_epochs == 0) return res;

  SeededRng root(cfg.seed);
  SgdOptimizer opt(cfg.momentum);
  const int default_iters = (n + cfg.batch - 1) / cfg.batch;
  const int iters = cfg.iters_per_epoch > 0 ? cfg.iters_per_epoch : default_iters;
  double lr = cfg.lr;
  const EpochCacheConfig cache_cfg = cfg.cache_config();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    res.model.set_eval();
    SeededRng label_rng = root.derive("labels-" + std::to_string(epoch));
    AuxiliaryCache cache;
    try {
      cache = build_epoch_cache(res.model, Xt, cache_cfg, label_rng);
    } catch (const NumericError& e) {
      // degenerate state (e.g. non-finite activations); keep the last usable model
      res.aborted = true;
      res.message = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    AdaptHistoryRow row;
    row.epoch = epoch;
    if (truth_labels) row.pseudo_accuracy = label_accuracy(cache.pseudo, *truth_labels);

    SeededRng shuffle_rng = root.derive("shuffle-" + std::to_string(epoch));
    std::vector<std::vector<int>> batches = make_batches(n, cfg.batch, shuffle_rng);
    int wrap = 0;
    double sum_total = 0.0, sum_im = 0.0, sum_ss = 0.0;
    bool ok = true;
    for (int it = 0, cursor = 0; it < iters; ++it, ++cursor) {
      if (cursor == static_cast<int>(batches.size())) {
        // more iterations requested than chunks available: reshuffle and wrap
        ++wrap;
        SeededRng wrap_rng =
            root.derive("shuffle-" + std::to_string(epoch) + "-wrap-" + std::to_string(wrap));
        batches = make_batches(n, cfg.batch, wrap_rng);
        cursor = 0;
      }
      try {
        ObjectiveResult obj = objective(batches[static_cast<size_t>(cursor)], Xt, cache,
                                        res.model, cfg);
        if (!std::isfinite(obj.total)) throw NumericError("non-finite adaptation loss");
        opt.step(res.model, obj.grads, lr);
        sum_total += obj.total;
        sum_im += obj.im;
        sum_ss += obj.ss;
      } catch (const NumericError& e) {
        res.aborted = true;
        res.message = "epoch " + std::to_string(epoch) + ": " + e.what();
        ok = false;
        break;
      }
      row.total = sum_total / (it + 1);
      row.im = sum_im / (it + 1);
      row.ss = sum_ss / (it + 1);
    }
    lr *= cfg.lr_decay;

    if (truth_labels) {
      std::vector<int> pred = predict(res.model, Xt);
      row.target_accuracy = label_accuracy(pred, *truth_labels);
    }
    res.history.push_back(row);
    if (!ok) break;
  }
  res.model.set_eval();
  return res;
}

void save_history(const std::vector<AdaptHistoryRow>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open history file for writing: " + path);
  out << "epoch,total_loss,im_loss,ss_loss,pseudo_accuracy,target_accuracy\n";
  char buf[192];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.total, r.im,
                  r.ss, r.pseudo_accuracy, r.target_accuracy);
    out << buf;
  }
  if (!out) throw IoError("failed writing history file: " + path);
}

}  // namespace nnadapt
