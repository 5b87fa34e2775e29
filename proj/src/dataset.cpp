#include "nnadapt/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "nnadapt/errors.hpp"
#include "nnadapt/rng.hpp"

namespace nnadapt {

namespace {

RealMatrix draw_centers(int num_classes, int dims, double class_sep, SeededRng& rng) {
  RealMatrix centers(num_classes, dims);
  for (int k = 0; k < num_classes; ++k) {
    double norm2 = 0.0;
    for (int j = 0; j < dims; ++j) {
      double x = rng.normal(0.0, 1.0);
      centers(k, j) = x;
      norm2 += x * x;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (int j = 0; j < dims; ++j) centers(k, j) *= inv;
  }
  // Scale so the closest pair of centers sits exactly class_sep apart.
  double min_dist = std::numeric_limits<double>::infinity();
  for (int a = 0; a < num_classes; ++a)
    for (int b = a + 1; b < num_classes; ++b) {
      double d2 = 0.0;
      for (int j = 0; j < dims; ++j) {
        double diff = centers(a, j) - centers(b, j);
        d2 += diff * diff;
      }
      min_dist = std::min(min_dist, std::sqrt(d2));
    }
  if (min_dist < 1e-9) throw NumericError("generate_pair: degenerate class centers");
  double scale = class_sep / min_dist;
  for (double& x : centers.data) x *= scale;
  return centers;
}

DomainDataset sample_domain(const RealMatrix& centers, int n, double noise_std, DomainTag tag,
                            SeededRng& rng) {
  int K = centers.rows, d = centers.cols;
  DomainDataset ds;
  ds.features = RealMatrix(n, d);
  ds.labels.resize(n);
  ds.num_classes = K;
  ds.domain = tag;
  int row = 0;
  for (int k = 0; k < K; ++k) {
    int count = n / K + (k < n % K ? 1 : 0);
    for (int i = 0; i < count; ++i, ++row) {
      ds.labels[row] = k;
      for (int j = 0; j < d; ++j)
        ds.features(row, j) = centers(k, j) + (noise_std > 0.0 ? rng.normal(0.0, noise_std) : 0.0);
    }
  }
  return ds;
}

}  // namespace

std::pair<DomainDataset, DomainDataset> generate_pair(int n_per_domain, int num_classes, int dims,
                                                      const ShiftSpec& spec) {
  if (num_classes < 2) throw ConfigError("generate_pair: need at least 2 classes");
  if (n_per_domain < num_classes) throw ConfigError("generate_pair: n_per_domain < num_classes");
  if (dims < 2) throw ConfigError("generate_pair: need at least 2 dims");
  if (spec.noise_std < 0.0) throw ConfigError("generate_pair: negative noise_std");
  if (spec.class_sep <= 0.0) throw ConfigError("generate_pair: class_sep must be positive");
  if (!spec.translation.empty() && static_cast<int>(spec.translation.size()) != dims)
    throw ConfigError("generate_pair: translation length does not match dims");

  SeededRng rng(spec.seed);
  SeededRng center_rng = rng.derive("centers");
  SeededRng source_rng = rng.derive("source");
  SeededRng target_rng = rng.derive("target");

  RealMatrix src_centers = draw_centers(num_classes, dims, spec.class_sep, center_rng);

  RealMatrix tgt_centers = src_centers;
  double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
  for (int k = 0; k < num_classes; ++k) {
    double x0 = tgt_centers(k, 0), x1 = tgt_centers(k, 1);
    tgt_centers(k, 0) = c * x0 - s * x1;
    tgt_centers(k, 1) = s * x0 + c * x1;
    if (!spec.translation.empty())
      for (int j = 0; j < dims; ++j) tgt_centers(k, j) += spec.translation[j];
  }

  DomainDataset src = sample_domain(src_centers, n_per_domain, spec.noise_std, DomainTag::Source, source_rng);
  DomainDataset tgt = sample_domain(tgt_centers, n_per_domain, spec.noise_std, DomainTag::Target, target_rng);
  return {std::move(src), std::move(tgt)};
}

void save_csv(const DomainDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_csv: cannot open " + path + " for writing");
  for (int j = 0; j < ds.dims(); ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[40];
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.dims(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, j));
      out << buf << ',';
    }
    out << ds.labels[i] << '\n';
  }
  if (!out) throw IoError("save_csv: write failed for " + path);
}

DomainDataset load_csv(const std::string& path, int expected_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("load_csv: " + path + ": no rows");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  int dims = 0;
  {
    std::stringstream hs(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    if (cols.empty() || cols.back() != "label")
      throw IoError("load_csv: " + path + ": header must end with 'label'");
    dims = static_cast<int>(cols.size()) - 1;
    if (dims < 1) throw IoError("load_csv: " + path + ": no feature columns");
  }

  std::vector<double> values;
  std::vector<int> labels;
  int max_label = -1;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    int field = 0;
    for (; field < dims; ++field) {
      double v;
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || ptr == end || *ptr != ',')
        throw IoError("load_csv: " + path + ": line " + std::to_string(lineno) +
                      ": bad feature in column " + std::to_string(field));
      if (!std::isfinite(v))
        throw IoError("load_csv: " + path + ": line " + std::to_string(lineno) +
                      ": non-finite feature");
      values.push_back(v);
      p = ptr + 1;
    }
    int lab;
    auto [ptr, ec] = std::from_chars(p, end, lab);
    if (ec != std::errc() || ptr != end)
      throw IoError("load_csv: " + path + ": line " + std::to_string(lineno) + ": bad label");
    if (lab < 0 || (expected_classes > 0 && lab >= expected_classes))
      throw IoError("load_csv: " + path + ": line " + std::to_string(lineno) +
                    ": label out of range");
    labels.push_back(lab);
    max_label = std::max(max_label, lab);
  }
  if (labels.empty()) throw IoError("load_csv: " + path + ": no rows");

  DomainDataset ds;
  ds.features.rows = static_cast<int>(labels.size());
  ds.features.cols = dims;
  ds.features.data = std::move(values);
  ds.labels = std::move(labels);
  ds.num_classes = expected_classes > 0 ? expected_classes : max_label + 1;
  return ds;
}

}  // namespace nnadapt
