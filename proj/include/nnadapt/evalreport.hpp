#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nnadapt/adapt.hpp"
#include "nnadapt/dataset.hpp"
#include "nnadapt/matrix.hpp"
#include "nnadapt/pretrain.hpp"

namespace nnadapt {

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class;      // recall per true class; 0 for absent classes
  std::vector<int> confusion;         // K x K row-major, row = truth, col = prediction
  int num_classes = 0;
  uint64_t seed = 0;
  std::string fingerprint;

  int confusion_at(int truth, int pred) const {
    return confusion[static_cast<size_t>(truth * num_classes + pred)];
  }
};

EvalReport evaluate(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes);

// Top-2 principal components of the centered features. Sign convention: each
// component's largest-magnitude loading is positive.
RealMatrix project2d(const RealMatrix& features);

// FNV-1a hash of a canonical config string, rendered as 16 hex digits.
std::string config_fingerprint(const std::string& canonical_config);

void save_report(const EvalReport& report, const std::string& path);
void save_confusion(const EvalReport& report, const std::string& path);
// Columns: x, y, label, domain.
void save_projection(const RealMatrix& projected, const std::vector<int>& labels,
                     const std::string& domain, const std::string& path);

// One synthetic source/target task plus the training knobs shared by the
// multi-round experiment harnesses below. Each round r uses master_seed + r
// and derives fresh data/pretrain/adapt sub-seeds from it.
struct ExperimentTask {
  int n_per_domain = 1000;
  int num_classes = 4;
  int dims = 10;
  double rotation = 0.0;  // radians
  std::vector<double> translation;
  double noise_std = 1.0;
  double class_sep = 6.0;
  PretrainConfig pretrain;
  AdaptConfig adapt;
  int rounds = 10;
  uint64_t master_seed = 2020;
};

struct AblationRow {
  std::string variant;
  double mean_accuracy = 0.0;  // over rounds that finished
  int rounds_ok = 0;
  bool failed = false;  // true when any round aborted
};

// One row per config toggle (plus baselines), mean target accuracy over the
// task's rounds. The source model is pre-trained once per round and shared by
// every variant.
std::vector<AblationRow> run_ablation_suite(const ExperimentTask& task);

void save_ablation(const std::vector<AblationRow>& rows, const std::string& path);

// Round-averaged accuracies of the two adaptation modes against the
// un-adapted source model, sharing one pretrain per round.
struct BenchmarkStats {
  double source_only = 0.0;
  double nnh = 0.0;
  double shnnh = 0.0;
  double pseudo_epoch1 = 0.0;  // fused pseudo-label accuracy at the first epoch (nnh)
  int rounds = 0;
};

BenchmarkStats run_adaptation_benchmark(const ExperimentTask& task);

}  // namespace nnadapt
