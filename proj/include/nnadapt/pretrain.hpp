#pragma once

#include <cstdint>
#include <vector>

#include "nnadapt/dataset.hpp"
#include "nnadapt/model.hpp"

namespace nnadapt {

struct PretrainConfig {
  int hidden_dim = 64;
  int bottleneck_dim = 16;
  int epochs = 50;
  int batch = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double lr_decay = 1.0;  // multiplicative per epoch
  double label_smoothing = 0.1;
  uint64_t seed = 2020;
};

struct PretrainLogRow {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double accuracy = 0.0;
};

struct PretrainResult {
  TargetModel model;
  std::vector<PretrainLogRow> log;  // full-set eval after each epoch
};

// Row i = (1-gamma) * onehot(y_i) + gamma/K.
RealMatrix smooth_labels(const std::vector<int>& y, int num_classes, double gamma);

// Mean over rows of -sum_k lbar_{i,k} * log(max(p_{i,k}, 1e-12)).
double source_ce_loss(const RealMatrix& p, const RealMatrix& lbar);

// Mini-batch SGD on smoothed cross-entropy over the labeled source set.
// epochs = 0 returns the freshly initialized model untouched.
PretrainResult train_source(const DomainDataset& ds, const PretrainConfig& cfg);

void save_pretrain_log(const std::vector<PretrainLogRow>& log, const std::string& path);

}  // namespace nnadapt
