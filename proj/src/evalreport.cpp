#include "nnadapt/evalreport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "nnadapt/errors.hpp"
#include "nnadapt/rng.hpp"

namespace nnadapt {

EvalReport evaluate(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes) {
  if (pred.size() != truth.size()) throw NumericError("prediction/truth length mismatch");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (pred.empty()) throw NumericError("cannot evaluate empty label lists");

  EvalReport rep;
  rep.num_classes = num_classes;
  rep.confusion.assign(static_cast<size_t>(num_classes) * num_classes, 0);
  int hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i], t = truth[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
      throw NumericError("label out of range at sample " + std::to_string(i));
    ++rep.confusion[static_cast<size_t>(t * num_classes + p)];
    if (p == t) ++hits;
  }
  rep.accuracy = static_cast<double>(hits) / pred.size();
  rep.per_class.assign(static_cast<size_t>(num_classes), 0.0);
  for (int t = 0; t < num_classes; ++t) {
    int row_total = 0;
    for (int p = 0; p < num_classes; ++p) row_total += rep.confusion_at(t, p);
    if (row_total > 0)
      rep.per_class[static_cast<size_t>(t)] =
          static_cast<double>(rep.confusion_at(t, t)) / row_total;
  }
  return rep;
}

namespace {

// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
// eigenvalues; eigenvectors land in the columns of `vecs`.
std::vector<double> jacobi_eigen(RealMatrix a, RealMatrix& vecs) {
  const int d = a.rows;
  vecs = RealMatrix(d, d);
  for (int i = 0; i < d; ++i) vecs(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-22) break;

    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          const double vkp = vecs(k, p), vkq = vecs(k, q);
          vecs(k, p) = c * vkp - s * vkq;
          vecs(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> vals(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) vals[static_cast<size_t>(i)] = a(i, i);
  return vals;
}

}  // namespace

RealMatrix project2d(const RealMatrix& features) {
  const int n = features.rows, d = features.cols;
  if (n < 2) throw NumericError("projection needs at least 2 rows");
  if (d < 1) throw NumericError("projection needs at least 1 column");

  RealMatrix centered = features;
  for (int c = 0; c < d; ++c) {
    double mean = 0.0;
    for (int r = 0; r < n; ++r) mean += centered(r, c);
    mean /= n;
    for (int r = 0; r < n; ++r) centered(r, c) -= mean;
  }

  RealMatrix cov(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += centered(r, a) * centered(r, b);
      cov(a, b) = cov(b, a) = s / (n - 1);
    }

  RealMatrix vecs;
  std::vector<double> vals = jacobi_eigen(cov, vecs);

  // indices of the two largest eigenvalues (stable order for ties)
  std::vector<int> order(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return vals[static_cast<size_t>(x)] > vals[static_cast<size_t>(y)];
  });

  RealMatrix out(n, 2);
  const int comps = std::min(2, d);
  for (int c = 0; c < comps; ++c) {
    const int col = order[static_cast<size_t>(c)];
    // sign convention: largest-magnitude loading positive
    int arg = 0;
    for (int k = 1; k < d; ++k)
      if (std::abs(vecs(k, col)) > std::abs(vecs(arg, col))) arg = k;
    const double sign = vecs(arg, col) >= 0.0 ? 1.0 : -1.0;
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += centered(r, k) * vecs(k, col);
      out(r, c) = sign * s;
    }
  }
  return out;  // second column stays zero when d == 1
}

std::string config_fingerprint(const std::string& canonical_config) {
  const uint64_t h = fnv1a64(canonical_config);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void save_report(const EvalReport& report, const std::string& path) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["per_class_accuracy"] = report.per_class;
  j["num_classes"] = report.num_classes;
  j["seed"] = report.seed;
  j["config_fingerprint"] = report.fingerprint;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report file for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing report file: " + path);
}

void save_confusion(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open confusion file for writing: " + path);
  for (int t = 0; t < report.num_classes; ++t) {
    for (int p = 0; p < report.num_classes; ++p) {
      if (p) out << ',';
      out << report.confusion_at(t, p);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing confusion file: " + path);
}

void save_projection(const RealMatrix& projected, const std::vector<int>& labels,
                     const std::string& domain, const std::string& path) {
  if (projected.rows != static_cast<int>(labels.size()))
    throw NumericError("projection/label length mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open projection file for writing: " + path);
  out << "x,y,label,domain\n";
  char buf[128];
  for (int r = 0; r < projected.rows; ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,", projected(r, 0), projected(r, 1),
                  labels[static_cast<size_t>(r)]);
    out << buf << domain << '\n';
  }
  if (!out) throw IoError("failed writing projection file: " + path);
}

namespace {

struct RoundData {
  DomainDataset source, target;
  TargetModel source_model;
  AdaptConfig adapt_base;  // task adapt config with this round's seed
};

RoundData prepare_round(const ExperimentTask& task, int round) {
  const SeededRng round_root(task.master_seed + static_cast<uint64_t>(round));
  ShiftSpec spec;
  spec.rotation = task.rotation;
  spec.translation = task.translation;
  spec.noise_std = task.noise_std;
  spec.class_sep = task.class_sep;
  spec.seed = round_root.derive("data").seed();

  RoundData rd;
  std::tie(rd.source, rd.target) =
      generate_pair(task.n_per_domain, task.num_classes, task.dims, spec);

  PretrainConfig pc = task.pretrain;
  pc.seed = round_root.derive("pretrain").seed();
  rd.source_model = train_source(rd.source, pc).model;

  rd.adapt_base = task.adapt;
  rd.adapt_base.seed = round_root.derive("adapt").seed();
  return rd;
}

double accuracy_of(TargetModel& m, const DomainDataset& ds) {
  return evaluate(predict(m, ds.features), ds.labels, ds.num_classes).accuracy;
}

}  // namespace

std::vector<AblationRow> run_ablation_suite(const ExperimentTask& task) {
  struct Variant {
    std::string name;
    void (*tweak)(AdaptConfig&);
  };
  std::vector<Variant> variants = {
      {"full", [](AdaptConfig&) {}},
      {"no-im", [](AdaptConfig& c) { c.use_im = false; }},
      {"no-ss", [](AdaptConfig& c) { c.beta = 0.0; }},
      {"omega-in-0", [](AdaptConfig& c) { c.omega_in = 0.0; }},
      {"eta-in-0", [](AdaptConfig& c) { c.eta_in = 0.0; }},
      {"no-fused-pl",
       [](AdaptConfig& c) {
         c.alpha = 1.0;  // lambda pinned at 1: neighbor similarity ignored
         c.delta = 0.0;
       }},
  };
  if (task.adapt.mode == NeighborMode::Shnnh) {
    variants.push_back({"no-chain", [](AdaptConfig& c) { c.use_chain_search = false; }});
    variants.push_back(
        {"ce-only", [](AdaptConfig& c) { c.confident_rule = ConfidentRule::EntropyOnly; }});
    variants.push_back(
        {"cd-only", [](AdaptConfig& c) { c.confident_rule = ConfidentRule::DistanceOnly; }});
  }

  std::vector<AblationRow> rows(variants.size() + 1);
  rows[0].variant = "source-only";
  for (size_t v = 0; v < variants.size(); ++v) rows[v + 1].variant = variants[v].name;

  for (int r = 0; r < task.rounds; ++r) {
    RoundData rd = prepare_round(task, r);
    rows[0].mean_accuracy += accuracy_of(rd.source_model, rd.target);
    ++rows[0].rounds_ok;
    for (size_t v = 0; v < variants.size(); ++v) {
      AdaptConfig cfg = rd.adapt_base;
      variants[v].tweak(cfg);
      AblationRow& row = rows[v + 1];
      try {
        AdaptResult res = adapt_loop(rd.source_model, rd.target.features, cfg, &rd.target.labels);
        if (res.aborted) {
          row.failed = true;
          continue;
        }
        row.mean_accuracy += accuracy_of(res.model, rd.target);
        ++row.rounds_ok;
      } catch (const NumericError&) {
        row.failed = true;
      }
    }
  }
  for (auto& row : rows)
    if (row.rounds_ok > 0) row.mean_accuracy /= row.rounds_ok;
  return rows;
}

void save_ablation(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open ablation file for writing: " + path);
  out << "variant,mean_accuracy,rounds_ok,status\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.mean_accuracy);
    out << row.variant << ',' << buf << ',' << row.rounds_ok << ','
        << (row.failed ? "failed" : "ok") << '\n';
  }
  if (!out) throw IoError("failed writing ablation file: " + path);
}

BenchmarkStats run_adaptation_benchmark(const ExperimentTask& task) {
  BenchmarkStats stats;
  for (int r = 0; r < task.rounds; ++r) {
    RoundData rd = prepare_round(task, r);
    stats.source_only += accuracy_of(rd.source_model, rd.target);

    AdaptConfig nnh_cfg = rd.adapt_base;
    nnh_cfg.mode = NeighborMode::Nnh;
    AdaptResult nnh_res =
        adapt_loop(rd.source_model, rd.target.features, nnh_cfg, &rd.target.labels);
    stats.nnh += accuracy_of(nnh_res.model, rd.target);
    if (!nnh_res.history.empty()) stats.pseudo_epoch1 += nnh_res.history.front().pseudo_accuracy;

    AdaptConfig sh_cfg = rd.adapt_base;
    sh_cfg.mode = NeighborMode::Shnnh;
    AdaptResult sh_res =
        adapt_loop(rd.source_model, rd.target.features, sh_cfg, &rd.target.labels);
    stats.shnnh += accuracy_of(sh_res.model, rd.target);
    ++stats.rounds;
  }
  if (stats.rounds > 0) {
    stats.source_only /= stats.rounds;
    stats.nnh /= stats.rounds;
    stats.shnnh /= stats.rounds;
    stats.pseudo_epoch1 /= stats.rounds;
  }
  return stats;
}

}  // namespace nnadapt
