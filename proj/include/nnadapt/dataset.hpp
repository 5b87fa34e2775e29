#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nnadapt/matrix.hpp"

namespace nnadapt {

enum class DomainTag { Source, Target };

// One domain: n x d features plus labels in [0, K). Target labels are kept
// for evaluation only; adaptation never reads them.
struct DomainDataset {
  RealMatrix features;
  std::vector<int> labels;
  int num_classes = 0;
  DomainTag domain = DomainTag::Source;

  int size() const { return features.rows; }
  int dims() const { return features.cols; }
};

// Source -> target transform: rigid rotation in the leading 2D plane, a
// translation, and fresh Gaussian noise around the moved class centers.
struct ShiftSpec {
  double rotation = 0.0;  // radians, applied in coordinates 0 and 1
  std::vector<double> translation;  // length d; empty means zero
  double noise_std = 1.0;
  double class_sep = 6.0;  // minimum pairwise distance between class centers
  uint64_t seed = 0;
};

// K Gaussian blobs per domain with balanced classes; deterministic in the
// spec seed. Class centers are drawn as random directions scaled so the
// minimum pairwise center distance equals class_sep; target centers are the
// rotated + translated source centers.
std::pair<DomainDataset, DomainDataset> generate_pair(int n_per_domain, int num_classes, int dims,
                                                      const ShiftSpec& spec);

// CSV with header f0,...,f{d-1},label. LF line endings, UTF-8.
// When expected_classes > 0, any label outside [0, expected_classes) is a
// parse error naming the offending line; otherwise K is inferred as the
// largest label + 1.
void save_csv(const DomainDataset& ds, const std::string& path);
DomainDataset load_csv(const std::string& path, int expected_classes = 0);

}  // namespace nnadapt
