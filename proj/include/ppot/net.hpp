#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppot/mat.hpp"
#include "ppot/measure.hpp"
#include "ppot/objectives.hpp"
#include "ppot/prototypes.hpp"
#include "ppot/rng.hpp"

namespace ppot {

// Two-layer tanh perceptron feeding an affine classification head:
//   hidden   = tanh(w1 x + b1)
//   feature  = w2 hidden + b2
//   logits   = w3 feature + b3
// tanh keeps everything smooth, which the finite-difference checks rely on.
struct NetworkParams {
  Mat w1;  // hidden_dim x input_dim
  Vec b1;
  Mat w2;  // feature_dim x hidden_dim
  Vec b2;
  Mat w3;  // num_classes x feature_dim
  Vec b3;

  std::size_t input_dim() const { return w1.cols; }
  std::size_t hidden_dim() const { return w1.rows; }
  std::size_t feature_dim() const { return w2.rows; }
  std::size_t num_classes() const { return w3.rows; }
};

NetworkParams init_network(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t feature_dim, std::size_t num_classes,
                           Rng& rng);

struct ForwardResult {
  Mat hidden;         // batch x hidden_dim, post-tanh
  Mat features;       // batch x feature_dim
  Mat logits;         // batch x num_classes
  Mat probabilities;  // softmax rows
};

// inputs are batch x input_dim, one sample per row
ForwardResult forward(const NetworkParams& params, const Mat& inputs);

struct Gradients {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;
  Mat w3;
  Vec b3;
};

Gradients zero_gradients(const NetworkParams& params);

struct LossBreakdown {
  double rce = 0.0;  // reweighted cross-entropy on the source batch
  double pe = 0.0;   // reweighted entropy on the target batch
  double ne = 0.0;   // entropy term weighted by the unknown weights
  double ot = 0.0;   // <plan, distance(prototypes, target features)>
  double total = 0.0;
};

// Loss of the combined objective with the transport plan and prototypes held
// constant. Forward passes only; used as the finite-difference oracle.
LossBreakdown compute_losses(const NetworkParams& params,
                             const Mat& source_inputs,
                             const std::vector<int>& source_labels,
                             const Mat& target_inputs,
                             const TransportPlan& plan,
                             const PrototypeSet& bank,
                             const WeightVectors& weights,
                             const LossWeights& loss_weights);

struct BackwardResult {
  LossBreakdown losses;
  Gradients grads;
};

// Analytic gradient of compute_losses's total. The plan and the prototypes
// are constants; the transport term reaches the parameters only through the
// target features, with a zero subgradient where a feature coincides with a
// prototype.
BackwardResult backward(const NetworkParams& params, const Mat& source_inputs,
                        const std::vector<int>& source_labels,
                        const Mat& target_inputs, const TransportPlan& plan,
                        const PrototypeSet& bank, const WeightVectors& weights,
                        const LossWeights& loss_weights);

// Plain class-weighted cross-entropy training step used when every transport
// coefficient is zero (supervised source-only baseline).
BackwardResult backward_cross_entropy(const NetworkParams& params,
                                      const Mat& inputs,
                                      const std::vector<int>& labels,
                                      const Vec& class_weights);

// Nesterov momentum SGD with a polynomially decaying learning rate:
// lr = base_lr * (1 + schedule_a * t)^(-schedule_power), t = step/total_steps.
struct OptimizerState {
  Gradients momentum;
  double base_lr = 0.01;
  double momentum_coef = 0.9;
  double weight_decay = 5e-4;
  double schedule_a = 10.0;
  double schedule_power = 0.75;
  long step = 0;
  long total_steps = 1;
};

OptimizerState make_optimizer(const NetworkParams& params, double base_lr,
                              long total_steps);

double current_learning_rate(const OptimizerState& state);

void sgd_step(NetworkParams& params, const Gradients& grads,
              OptimizerState& state);

/// Endless class-balanced batch stream: every batch holds batch_size / L
// samples of each class; a class pool reshuffles when exhausted.
class ClassBalancedSampler {
 public:
  ClassBalancedSampler(const std::vector<int>& labels, std::size_t num_classes,
                       std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next_batch();

 private:
  std::vector<std::vector<std::size_t>> pools_;
  std::vector<std::size_t> cursors_;
  std::size_t per_class_;
  Rng rng_;
};

/// plain-text checkpoint: "ppot-net 1" header then named shape-prefixed tensors
void save_network(const NetworkParams& params, const std::string& path);
NetworkParams load_network(const std::string& path);

}  // namespace ppot
