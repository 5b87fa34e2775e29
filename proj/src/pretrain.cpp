#include "nnadapt/pretrain.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "nnadapt/batching.hpp"
#include "nnadapt/errors.hpp"
#include "nnadapt/numeric.hpp"

namespace nnadapt {

RealMatrix smooth_labels(const std::vector<int>& y, int num_classes, double gamma) {
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("label smoothing gamma must be in [0,1)");
  RealMatrix out(static_cast<int>(y.size()), num_classes);
  const double base = gamma / num_classes;
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= num_classes) throw ConfigError("label out of range in smooth_labels");
    for (int k = 0; k < num_classes; ++k) out(static_cast<int>(i), k) = base;
    out(static_cast<int>(i), y[i]) += 1.0 - gamma;
  }
  return out;
}

double source_ce_loss(const RealMatrix& p, const RealMatrix& lbar) {
  if (!p.same_shape(lbar)) throw NumericError("probability/label shape mismatch");
  if (p.rows < 1) throw NumericError("empty probability matrix");
  double total = 0.0;
  for (int i = 0; i < p.rows; ++i) {
    for (int k = 0; k < p.cols; ++k) {
      total -= lbar(i, k) * std::log(std::max(p(i, k), 1e-12));
    }
  }
  return total / p.rows;
}

namespace {

double full_set_accuracy(const RealMatrix& probs, const std::vector<int>& labels) {
  int hits = 0;
  for (int i = 0; i < probs.rows; ++i) {
    int best = 0;
    for (int k = 1; k < probs.cols; ++k)
      if (probs(i, k) > probs(i, best)) best = k;
    if (best == labels[static_cast<size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / probs.rows;
}

}  // namespace

PretrainResult train_source(const DomainDataset& ds, const PretrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.lr <= 0.0) throw ConfigError("learning rate must be positive");
  const int n = ds.features.rows;
  const int K = ds.num_classes;
  if (static_cast<int>(ds.labels.size()) != n) throw ConfigError("labels/features length mismatch");

  SeededRng root(cfg.seed);
  SeededRng init_rng = root.derive("init");
  PretrainResult res;
  res.model = init_model(ds.features.cols, cfg.hidden_dim, cfg.bottleneck_dim, K, init_rng);
  if (cfg.epochs == 0) return res;

  const RealMatrix lbar_full = smooth_labels(ds.labels, K, cfg.label_smoothing);
  SgdOptimizer opt(cfg.momentum);
  double lr = cfg.lr;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    SeededRng shuffle_rng = root.derive("shuffle-" + std::to_string(epoch));
    res.model.set_train();
    for (const auto& batch : make_batches(n, cfg.batch, shuffle_rng)) {
      const RealMatrix xb = take_rows(ds.features, batch);
      const RealMatrix lb = take_rows(lbar_full, batch);
      ForwardTrace tr = forward(res.model, xb);
      const double loss = source_ce_loss(tr.p, lb);
      if (!std::isfinite(loss))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      // d(smoothed CE)/dlogits = (p - lbar) / batch
      RealMatrix dlogits(tr.p.rows, tr.p.cols);
      for (int i = 0; i < tr.p.rows; ++i)
        for (int k = 0; k < tr.p.cols; ++k)
          dlogits(i, k) = (tr.p(i, k) - lb(i, k)) / tr.p.rows;
      opt.step(res.model, backward(res.model, tr, dlogits), lr);
    }
    lr *= cfg.lr_decay;

    res.model.set_eval();
    ForwardTrace ev = forward(res.model, ds.features);
    res.log.push_back({epoch, source_ce_loss(ev.p, lbar_full), full_set_accuracy(ev.p, ds.labels)});
  }
  res.model.set_eval();
  return res;
}

void save_pretrain_log(const std::vector<PretrainLogRow>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open log file for writing: " + path);
  out << "epoch,loss,accuracy\n";
  char buf[96];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", row.epoch, row.loss, row.accuracy);
    out << buf;
  }
  if (!out) throw IoError("failed writing log file: " + path);
}

}  // namespace nnadapt
