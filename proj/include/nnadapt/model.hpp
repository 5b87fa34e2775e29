#pragma once

#include <string>
#include <vector>

#include "nnadapt/matrix.hpp"
#include "nnadapt/rng.hpp"

namespace nnadapt {

struct AffineParams {
  RealMatrix w;  // out x in
  std::vector<double> b;
};

struct BatchNormParams {
  std::vector<double> gamma, beta;
  std::vector<double> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Row k of the effective weight is g[k] * v_k / |v_k|.
struct WeightNormParams {
  RealMatrix v;  // K x d_b direction matrix
  std::vector<double> g;
  std::vector<double> b;
};

// f = classifier . bottleneck . extractor
//   extractor: affine(d -> d_h) + ReLU, affine(d_h -> d_h) + ReLU
//   bottleneck: affine(d_h -> d_b) + batch norm
//   classifier: weight-normalized affine (d_b -> K)
struct TargetModel {
  int in_dim = 0, hidden_dim = 0, bottleneck_dim = 0, num_classes = 0;
  AffineParams ext1, ext2, bott;
  BatchNormParams bn;
  WeightNormParams cls;
  bool classifier_frozen = false;
  bool training = false;

  void set_train() { training = true; }
  void set_eval() { training = false; }
};

enum class ForwardStage { UpToH, Full };

// Cached activations from one forward pass; inputs to backward.
struct ForwardTrace {
  bool training = false;
  bool has_extractor = false, has_head = false;
  RealMatrix x;            // extractor input
  RealMatrix pre1, h1;     // first affine output, post-ReLU
  RealMatrix pre2, h;      // second affine output, deep features
  RealMatrix head_in;      // bottleneck input (equals h for a full pass)
  RealMatrix t, xhat, b;   // bottleneck affine out, normalized, scaled+shifted
  std::vector<double> batch_mean, batch_var;
  RealMatrix v, p;         // logits, softmax probabilities
};

struct Gradients {
  RealMatrix ext1_w, ext2_w, bott_w, cls_v;
  std::vector<double> ext1_b, ext2_b, bott_b, bn_gamma, bn_beta, cls_g, cls_b;

  bool all_finite() const;
  void add(const Gradients& o);
};

Gradients zero_gradients(const TargetModel& m);

// Fresh model with uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] parameters,
// weight-norm gains set to the initial row norms, identity batch norm.
TargetModel init_model(int in_dim, int hidden_dim, int bottleneck_dim, int num_classes,
                       SeededRng& rng);

// Train mode uses batch statistics (batch size >= 2) and updates running
// statistics; eval mode uses running statistics.
ForwardTrace forward(TargetModel& m, const RealMatrix& x, ForwardStage stage = ForwardStage::Full);

// Bottleneck + classifier only, on externally supplied deep features.
ForwardTrace forward_head(TargetModel& m, const RealMatrix& deep_features);

// Reverse-mode through the whole network given dLoss/dlogits. Classifier
// gradients are zeroed when the classifier is frozen.
Gradients backward(const TargetModel& m, const ForwardTrace& trace, const RealMatrix& dlogits);

// Head-only backward; also produces dLoss/d(head input) for chaining.
void backward_head(const TargetModel& m, const ForwardTrace& trace, const RealMatrix& dlogits,
                   Gradients& grads, RealMatrix& d_head_in);

void backward_extractor(const TargetModel& m, const ForwardTrace& trace, const RealMatrix& d_h,
                        Gradients& grads);

// SGD with optional momentum. Frozen classifier parameters are never touched.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double momentum = 0.0) : momentum_(momentum) {}
  void step(TargetModel& m, const Gradients& g, double lr);

 private:
  double momentum_;
  bool has_velocity_ = false;
  Gradients velocity_;
};

// Single plain-SGD update: p -= lr * g for unfrozen parameters.
void sgd_step(TargetModel& m, const Gradients& g, double lr);

// JSON checkpoint: dims header, named parameter arrays, running statistics,
// frozen flag.
void save_checkpoint(const TargetModel& m, const std::string& path);
TargetModel load_checkpoint(const std::string& path);

}  // namespace nnadapt
