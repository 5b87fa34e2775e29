#include "nnadapt/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "nnadapt/errors.hpp"
#include "nnadapt/numeric.hpp"

namespace nnadapt {

using json = nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "nnadapt-checkpoint-v1";

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
  }
}

RealMatrix init_matrix(int rows, int cols, int fan_in, SeededRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  RealMatrix m(rows, cols);
  for (double& x : m.data) x = rng.uniform(-bound, bound);
  return m;
}

std::vector<double> init_bias(int n, int fan_in, SeededRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> b(n);
  for (double& x : b) x = rng.uniform(-bound, bound);
  return b;
}

double row_norm(const RealMatrix& m, int r) {
  double s = 0.0;
  for (int c = 0; c < m.cols; ++c) s += m(r, c) * m(r, c);
  return std::sqrt(s);
}

void relu_inplace(RealMatrix& m) {
  for (double& x : m.data)
    if (x < 0.0) x = 0.0;
}

// Effective classifier weight: row k = g_k * v_k / |v_k|.
RealMatrix effective_weight(const WeightNormParams& cls) {
  RealMatrix w(cls.v.rows, cls.v.cols);
  for (int k = 0; k < cls.v.rows; ++k) {
    const double nk = row_norm(cls.v, k);
    if (nk == 0.0) throw NumericError("weight-norm direction row has zero norm");
    const double s = cls.g[static_cast<size_t>(k)] / nk;
    for (int c = 0; c < cls.v.cols; ++c) w(k, c) = s * cls.v(k, c);
  }
  return w;
}

// y = x * w^T + b backward: accumulates dw, db, returns dx.
RealMatrix affine_backward(const RealMatrix& x, const RealMatrix& w, const RealMatrix& dy,
                           RealMatrix& dw, std::vector<double>& db) {
  // dw = dy^T * x
  for (int k = 0; k < w.rows; ++k) {
    for (int c = 0; c < w.cols; ++c) {
      double s = 0.0;
      for (int i = 0; i < x.rows; ++i) s += dy(i, k) * x(i, c);
      dw(k, c) += s;
    }
  }
  for (int k = 0; k < w.rows; ++k) {
    double s = 0.0;
    for (int i = 0; i < dy.rows; ++i) s += dy(i, k);
    db[static_cast<size_t>(k)] += s;
  }
  return matmul(dy, w);  // dx
}

json matrix_to_json(const RealMatrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

RealMatrix matrix_from_json(const json& j, int rows, int cols, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw IoError(std::string("checkpoint field ") + what + " has wrong row count");
  RealMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw IoError(std::string("checkpoint field ") + what + " has wrong column count");
    for (int c = 0; c < cols; ++c) {
      double v = row[static_cast<size_t>(c)].get<double>();
      if (!std::isfinite(v)) throw IoError(std::string("non-finite value in checkpoint field ") + what);
      m(r, c) = v;
    }
  }
  return m;
}

std::vector<double> vector_from_json(const json& j, int n, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw IoError(std::string("checkpoint field ") + what + " has wrong length");
  std::vector<double> v(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = j[static_cast<size_t>(i)].get<double>();
    if (!std::isfinite(x)) throw IoError(std::string("non-finite value in checkpoint field ") + what);
    v[static_cast<size_t>(i)] = x;
  }
  return v;
}

}  // namespace

bool Gradients::all_finite() const {
  auto vec_ok = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  return ext1_w.all_finite() && ext2_w.all_finite() && bott_w.all_finite() &&
         cls_v.all_finite() && vec_ok(ext1_b) && vec_ok(ext2_b) && vec_ok(bott_b) &&
         vec_ok(bn_gamma) && vec_ok(bn_beta) && vec_ok(cls_g) && vec_ok(cls_b);
}

void Gradients::add(const Gradients& o) {
  auto addm = [](RealMatrix& a, const RealMatrix& b) {
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
  };
  auto addv = [](std::vector<double>& a, const std::vector<double>& b) {
    for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  addm(ext1_w, o.ext1_w);
  addm(ext2_w, o.ext2_w);
  addm(bott_w, o.bott_w);
  addm(cls_v, o.cls_v);
  addv(ext1_b, o.ext1_b);
  addv(ext2_b, o.ext2_b);
  addv(bott_b, o.bott_b);
  addv(bn_gamma, o.bn_gamma);
  addv(bn_beta, o.bn_beta);
  addv(cls_g, o.cls_g);
  addv(cls_b, o.cls_b);
}

Gradients zero_gradients(const TargetModel& m) {
  Gradients g;
  g.ext1_w = RealMatrix(m.ext1.w.rows, m.ext1.w.cols);
  g.ext2_w = RealMatrix(m.ext2.w.rows, m.ext2.w.cols);
  g.bott_w = RealMatrix(m.bott.w.rows, m.bott.w.cols);
  g.cls_v = RealMatrix(m.cls.v.rows, m.cls.v.cols);
  g.ext1_b.assign(m.ext1.b.size(), 0.0);
  g.ext2_b.assign(m.ext2.b.size(), 0.0);
  g.bott_b.assign(m.bott.b.size(), 0.0);
  g.bn_gamma.assign(m.bn.gamma.size(), 0.0);
  g.bn_beta.assign(m.bn.beta.size(), 0.0);
  g.cls_g.assign(m.cls.g.size(), 0.0);
  g.cls_b.assign(m.cls.b.size(), 0.0);
  return g;
}

TargetModel init_model(int in_dim, int hidden_dim, int bottleneck_dim, int num_classes,
                       SeededRng& rng) {
  if (in_dim < 1 || hidden_dim < 1 || bottleneck_dim < 1 || num_classes < 2)
    throw ConfigError("model dimensions must be positive (and num_classes >= 2)");
  TargetModel m;
  m.in_dim = in_dim;
  m.hidden_dim = hidden_dim;
  m.bottleneck_dim = bottleneck_dim;
  m.num_classes = num_classes;

  m.ext1.w = init_matrix(hidden_dim, in_dim, in_dim, rng);
  m.ext1.b = init_bias(hidden_dim, in_dim, rng);
  m.ext2.w = init_matrix(hidden_dim, hidden_dim, hidden_dim, rng);
  m.ext2.b = init_bias(hidden_dim, hidden_dim, rng);
  m.bott.w = init_matrix(bottleneck_dim, hidden_dim, hidden_dim, rng);
  m.bott.b = init_bias(bottleneck_dim, hidden_dim, rng);

  m.bn.gamma.assign(static_cast<size_t>(bottleneck_dim), 1.0);
  m.bn.beta.assign(static_cast<size_t>(bottleneck_dim), 0.0);
  m.bn.running_mean.assign(static_cast<size_t>(bottleneck_dim), 0.0);
  m.bn.running_var.assign(static_cast<size_t>(bottleneck_dim), 1.0);

  m.cls.v = init_matrix(num_classes, bottleneck_dim, bottleneck_dim, rng);
  m.cls.g.resize(static_cast<size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    double nk = row_norm(m.cls.v, k);
    if (nk == 0.0) {  // astronomically unlikely, but keep the invariant
      m.cls.v(k, 0) = 1.0;
      nk = 1.0;
    }
    m.cls.g[static_cast<size_t>(k)] = nk;
  }
  m.cls.b = init_bias(num_classes, bottleneck_dim, rng);
  return m;
}

namespace {

// Bottleneck affine + batch norm + classifier; fills trace.head_in .. trace.p.
void run_head(TargetModel& m, const RealMatrix& in, ForwardTrace& tr) {
  const int n = in.rows;
  const int d_b = m.bottleneck_dim;
  tr.has_head = true;
  tr.head_in = in;
  tr.t = affine(in, m.bott.w, m.bott.b);

  tr.xhat = RealMatrix(n, d_b);
  tr.b = RealMatrix(n, d_b);
  tr.batch_mean.assign(static_cast<size_t>(d_b), 0.0);
  tr.batch_var.assign(static_cast<size_t>(d_b), 0.0);

  if (m.training) {
    if (n < 2) throw NumericError("batch norm in train mode needs at least 2 rows");
    for (int c = 0; c < d_b; ++c) {
      double mean = 0.0;
      for (int r = 0; r < n; ++r) mean += tr.t(r, c);
      mean /= n;
      double var = 0.0;
      for (int r = 0; r < n; ++r) {
        const double d = tr.t(r, c) - mean;
        var += d * d;
      }
      var /= n;  // biased, used for normalization
      tr.batch_mean[static_cast<size_t>(c)] = mean;
      tr.batch_var[static_cast<size_t>(c)] = var;
      const double inv_std = 1.0 / std::sqrt(var + m.bn.eps);
      for (int r = 0; r < n; ++r) {
        const double xh = (tr.t(r, c) - mean) * inv_std;
        tr.xhat(r, c) = xh;
        tr.b(r, c) = m.bn.gamma[static_cast<size_t>(c)] * xh + m.bn.beta[static_cast<size_t>(c)];
      }
      // running stats track the unbiased variance
      const double unbiased = var * static_cast<double>(n) / static_cast<double>(n - 1);
      m.bn.running_mean[static_cast<size_t>(c)] =
          (1.0 - m.bn.momentum) * m.bn.running_mean[static_cast<size_t>(c)] + m.bn.momentum * mean;
      m.bn.running_var[static_cast<size_t>(c)] =
          (1.0 - m.bn.momentum) * m.bn.running_var[static_cast<size_t>(c)] + m.bn.momentum * unbiased;
    }
  } else {
    for (int c = 0; c < d_b; ++c) {
      const double mean = m.bn.running_mean[static_cast<size_t>(c)];
      const double inv_std = 1.0 / std::sqrt(m.bn.running_var[static_cast<size_t>(c)] + m.bn.eps);
      for (int r = 0; r < n; ++r) {
        const double xh = (tr.t(r, c) - mean) * inv_std;
        tr.xhat(r, c) = xh;
        tr.b(r, c) = m.bn.gamma[static_cast<size_t>(c)] * xh + m.bn.beta[static_cast<size_t>(c)];
      }
    }
  }

  const RealMatrix w_eff = effective_weight(m.cls);
  tr.v = affine(tr.b, w_eff, m.cls.b);
  tr.p = softmax_rows(tr.v);
}

}  // namespace

ForwardTrace forward(TargetModel& m, const RealMatrix& x, ForwardStage stage) {
  if (x.cols != m.in_dim) throw NumericError("input width does not match model input dim");
  if (x.rows < 1) throw NumericError("forward needs at least one row");
  ForwardTrace tr;
  tr.training = m.training;
  tr.has_extractor = true;
  tr.x = x;
  tr.pre1 = affine(x, m.ext1.w, m.ext1.b);
  tr.h1 = tr.pre1;
  relu_inplace(tr.h1);
  tr.pre2 = affine(tr.h1, m.ext2.w, m.ext2.b);
  tr.h = tr.pre2;
  relu_inplace(tr.h);
  if (stage == ForwardStage::Full) run_head(m, tr.h, tr);
  return tr;
}

ForwardTrace forward_head(TargetModel& m, const RealMatrix& deep_features) {
  if (deep_features.cols != m.hidden_dim)
    throw NumericError("deep feature width does not match model hidden dim");
  if (deep_features.rows < 1) throw NumericError("forward needs at least one row");
  ForwardTrace tr;
  tr.training = m.training;
  run_head(m, deep_features, tr);
  return tr;
}

void backward_head(const TargetModel& m, const ForwardTrace& trace, const RealMatrix& dlogits,
                   Gradients& grads, RealMatrix& d_head_in) {
  if (!trace.has_head) throw NumericError("trace has no head activations");
  if (!trace.training || !m.training)
    throw NumericError("backward needs a train-mode trace and a train-mode model");
  if (!dlogits.same_shape(trace.v)) throw NumericError("dlogits shape mismatch");
  const int n = dlogits.rows;
  const int d_b = m.bottleneck_dim;
  const int K = m.num_classes;

  // classifier: logits = b * w_eff^T + bias
  const RealMatrix w_eff = effective_weight(m.cls);
  RealMatrix dw_eff(K, d_b);
  std::vector<double> dcls_b(static_cast<size_t>(K), 0.0);
  RealMatrix db_act = affine_backward(trace.b, w_eff, dlogits, dw_eff, dcls_b);

  if (!m.classifier_frozen) {
    for (size_t k = 0; k < dcls_b.size(); ++k) grads.cls_b[k] += dcls_b[k];
    // w_eff_k = g_k * vhat_k:   dg_k = dw_eff_k . vhat_k,
    // dv_k = (g_k/|v_k|) (dw_eff_k - (dw_eff_k . vhat_k) vhat_k)
    for (int k = 0; k < K; ++k) {
      const double nk = row_norm(m.cls.v, k);
      double dot = 0.0;
      for (int c = 0; c < d_b; ++c) dot += dw_eff(k, c) * m.cls.v(k, c) / nk;
      grads.cls_g[static_cast<size_t>(k)] += dot;
      const double s = m.cls.g[static_cast<size_t>(k)] / nk;
      for (int c = 0; c < d_b; ++c) {
        const double vhat = m.cls.v(k, c) / nk;
        grads.cls_v(k, c) += s * (dw_eff(k, c) - dot * vhat);
      }
    }
  }

  // batch norm: b = gamma * xhat + beta
  RealMatrix dt(n, d_b);
  for (int c = 0; c < d_b; ++c) {
    double dgamma = 0.0, dbeta = 0.0;
    for (int r = 0; r < n; ++r) {
      dgamma += db_act(r, c) * trace.xhat(r, c);
      dbeta += db_act(r, c);
    }
    grads.bn_gamma[static_cast<size_t>(c)] += dgamma;
    grads.bn_beta[static_cast<size_t>(c)] += dbeta;

    const double gamma = m.bn.gamma[static_cast<size_t>(c)];
    const double inv_std = 1.0 / std::sqrt(trace.batch_var[static_cast<size_t>(c)] + m.bn.eps);
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int r = 0; r < n; ++r) {
      const double dxh = db_act(r, c) * gamma;
      sum_dxhat += dxh;
      sum_dxhat_xhat += dxh * trace.xhat(r, c);
    }
    for (int r = 0; r < n; ++r) {
      const double dxh = db_act(r, c) * gamma;
      dt(r, c) = (inv_std / n) * (n * dxh - sum_dxhat - trace.xhat(r, c) * sum_dxhat_xhat);
    }
  }

  // bottleneck affine
  d_head_in = affine_backward(trace.head_in, m.bott.w, dt, grads.bott_w, grads.bott_b);
}

void backward_extractor(const TargetModel& m, const ForwardTrace& trace, const RealMatrix& d_h,
                        Gradients& grads) {
  if (!trace.has_extractor) throw NumericError("trace has no extractor activations");
  if (!d_h.same_shape(trace.h)) throw NumericError("d_h shape mismatch");
  const int n = d_h.rows;

  RealMatrix dpre2 = d_h;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < dpre2.cols; ++c)
      if (trace.pre2(r, c) <= 0.0) dpre2(r, c) = 0.0;
  RealMatrix dh1 = affine_backward(trace.h1, m.ext2.w, dpre2, grads.ext2_w, grads.ext2_b);

  RealMatrix dpre1 = dh1;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < dpre1.cols; ++c)
      if (trace.pre1(r, c) <= 0.0) dpre1(r, c) = 0.0;
  affine_backward(trace.x, m.ext1.w, dpre1, grads.ext1_w, grads.ext1_b);
}

Gradients backward(const TargetModel& m, const ForwardTrace& trace, const RealMatrix& dlogits) {
  Gradients grads = zero_gradients(m);
  RealMatrix d_head_in;
  backward_head(m, trace, dlogits, grads, d_head_in);
  backward_extractor(m, trace, d_head_in, grads);
  return grads;
}

namespace {

void apply_plain(TargetModel& m, const Gradients& g, double lr) {
  auto upd_m = [lr](RealMatrix& p, const RealMatrix& gr) {
    for (size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * gr.data[i];
  };
  auto upd_v = [lr](std::vector<double>& p, const std::vector<double>& gr) {
    for (size_t i = 0; i < p.size(); ++i) p[i] -= lr * gr[i];
  };
  upd_m(m.ext1.w, g.ext1_w);
  upd_v(m.ext1.b, g.ext1_b);
  upd_m(m.ext2.w, g.ext2_w);
  upd_v(m.ext2.b, g.ext2_b);
  upd_m(m.bott.w, g.bott_w);
  upd_v(m.bott.b, g.bott_b);
  upd_v(m.bn.gamma, g.bn_gamma);
  upd_v(m.bn.beta, g.bn_beta);
  if (!m.classifier_frozen) {
    upd_m(m.cls.v, g.cls_v);
    upd_v(m.cls.g, g.cls_g);
    upd_v(m.cls.b, g.cls_b);
  }
}

}  // namespace

void sgd_step(TargetModel& m, const Gradients& g, double lr) {
  if (!g.all_finite()) throw NumericError("non-finite gradient in sgd step");
  apply_plain(m, g, lr);
}

void SgdOptimizer::step(TargetModel& m, const Gradients& g, double lr) {
  if (!g.all_finite()) throw NumericError("non-finite gradient in sgd step");
  if (momentum_ == 0.0) {
    apply_plain(m, g, lr);
    return;
  }
  if (!has_velocity_) {
    velocity_ = zero_gradients(m);
    has_velocity_ = true;
  }
  auto mix_m = [this](RealMatrix& v, const RealMatrix& gr) {
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = momentum_ * v.data[i] + gr.data[i];
  };
  auto mix_v = [this](std::vector<double>& v, const std::vector<double>& gr) {
    for (size_t i = 0; i < v.size(); ++i) v[i] = momentum_ * v[i] + gr[i];
  };
  mix_m(velocity_.ext1_w, g.ext1_w);
  mix_v(velocity_.ext1_b, g.ext1_b);
  mix_m(velocity_.ext2_w, g.ext2_w);
  mix_v(velocity_.ext2_b, g.ext2_b);
  mix_m(velocity_.bott_w, g.bott_w);
  mix_v(velocity_.bott_b, g.bott_b);
  mix_v(velocity_.bn_gamma, g.bn_gamma);
  mix_v(velocity_.bn_beta, g.bn_beta);
  mix_m(velocity_.cls_v, g.cls_v);
  mix_v(velocity_.cls_g, g.cls_g);
  mix_v(velocity_.cls_b, g.cls_b);
  apply_plain(m, velocity_, lr);
}

void save_checkpoint(const TargetModel& m, const std::string& path) {
  json j;
  j["format"] = kCheckpointFormat;
  j["dims"] = {{"in_dim", m.in_dim},
               {"hidden_dim", m.hidden_dim},
               {"bottleneck_dim", m.bottleneck_dim},
               {"num_classes", m.num_classes}};
  j["classifier_frozen"] = m.classifier_frozen;
  j["ext1_w"] = matrix_to_json(m.ext1.w);
  j["ext1_b"] = m.ext1.b;
  j["ext2_w"] = matrix_to_json(m.ext2.w);
  j["ext2_b"] = m.ext2.b;
  j["bott_w"] = matrix_to_json(m.bott.w);
  j["bott_b"] = m.bott.b;
  j["bn_gamma"] = m.bn.gamma;
  j["bn_beta"] = m.bn.beta;
  j["bn_running_mean"] = m.bn.running_mean;
  j["bn_running_var"] = m.bn.running_var;
  j["bn_momentum"] = m.bn.momentum;
  j["bn_eps"] = m.bn.eps;
  j["cls_v"] = matrix_to_json(m.cls.v);
  j["cls_g"] = m.cls.g;
  j["cls_b"] = m.cls.b;

  std::ofstream out(path);
  if (!out) throw IoError("cannot open checkpoint file for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing checkpoint file: " + path);
}

TargetModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint json in " + path + ": " + e.what());
  }
  try {
    if (!j.contains("format") || j["format"].get<std::string>() != kCheckpointFormat)
      throw IoError("unrecognized checkpoint format in " + path);
    const json& dims = j.at("dims");
    TargetModel m;
    m.in_dim = dims.at("in_dim").get<int>();
    m.hidden_dim = dims.at("hidden_dim").get<int>();
    m.bottleneck_dim = dims.at("bottleneck_dim").get<int>();
    m.num_classes = dims.at("num_classes").get<int>();
    if (m.in_dim < 1 || m.hidden_dim < 1 || m.bottleneck_dim < 1 || m.num_classes < 2)
      throw IoError("checkpoint dims are invalid in " + path);
    m.classifier_frozen = j.at("classifier_frozen").get<bool>();
    m.ext1.w = matrix_from_json(j.at("ext1_w"), m.hidden_dim, m.in_dim, "ext1_w");
    m.ext1.b = vector_from_json(j.at("ext1_b"), m.hidden_dim, "ext1_b");
    m.ext2.w = matrix_from_json(j.at("ext2_w"), m.hidden_dim, m.hidden_dim, "ext2_w");
    m.ext2.b = vector_from_json(j.at("ext2_b"), m.hidden_dim, "ext2_b");
    m.bott.w = matrix_from_json(j.at("bott_w"), m.bottleneck_dim, m.hidden_dim, "bott_w");
    m.bott.b = vector_from_json(j.at("bott_b"), m.bottleneck_dim, "bott_b");
    m.bn.gamma = vector_from_json(j.at("bn_gamma"), m.bottleneck_dim, "bn_gamma");
    m.bn.beta = vector_from_json(j.at("bn_beta"), m.bottleneck_dim, "bn_beta");
    m.bn.running_mean = vector_from_json(j.at("bn_running_mean"), m.bottleneck_dim, "bn_running_mean");
    m.bn.running_var = vector_from_json(j.at("bn_running_var"), m.bottleneck_dim, "bn_running_var");
    m.bn.momentum = j.at("bn_momentum").get<double>();
    m.bn.eps = j.at("bn_eps").get<double>();
    m.cls.v = matrix_from_json(j.at("cls_v"), m.num_classes, m.bottleneck_dim, "cls_v");
    m.cls.g = vector_from_json(j.at("cls_g"), m.num_classes, "cls_g");
    m.cls.b = vector_from_json(j.at("cls_b"), m.num_classes, "cls_b");
    check_finite(m.cls.g, "cls_g");
    return m;
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path + " is missing fields: " + e.what());
  }
}

}  // namespace nnadapt
