#pragma once

#include <cstddef>
#include <vector>

#include "ppot/measure.hpp"

namespace ppot {

// floor applied inside every log; keeps losses finite without disturbing any
// quantity above test tolerances
constexpr double kProbabilityFloor = 1e-12;

struct LossWeights {
  double eta1 = 5.0;    // transport loss
  double eta2 = 0.01;   // entropy minimization on likely-known targets
  double eta3 = 2.0;    // entropy maximization on likely-unknown targets
};

// plan-derived sample/class weights used by the reweighted losses
struct WeightVectors {
  Vec target_known;    // w^t, length of the target batch
  Vec target_unknown;  // w^u, same length
  Vec source_class;    // w^s, one entry per class
};

// adaptive estimates of the transported-mass ratio (alpha) and the source
// common-class ratio (beta), with their EMA rates and thresholds
struct MassEstimates {
  double alpha = 1.0;
  double beta = 1.0;
  double lambda1 = 0.001;
  double lambda2 = 0.001;
  double tau1 = 0.9;
  double tau2 = 1.0;
  double alpha_floor = 0.0;  // training uses 2/b
};

// w^t_i = (b / alpha) * column sum i; sums to b when the plan carries mass
// alpha. For full-data diagnostics pass the data size as batch_size.
Vec target_weights(const TransportPlan& plan, double alpha,
                   std::size_t batch_size);

// raw u_i = max(0, 1 - w^t_i); only the ceil(keep_fraction * b) largest
// entries survive (ties resolved toward lower index), the rest are zeroed
Vec unknown_weights(const Vec& target_known, double keep_fraction);

// w^s_j = (L / alpha) * row sum j; sums to L when the plan carries mass alpha
Vec source_class_weights(const TransportPlan& plan, double alpha,
                         std::size_t num_classes);

// -sum_i w_i sum_j p_ij log p_ij over a row-stochastic matrix
double reweighted_entropy_loss(const Mat& probabilities, const Vec& weights);

// same accumulation with the unknown weights; enters the total loss with a
// minus sign (entropy is pushed up on likely-unknown samples)
double negative_entropy_loss(const Mat& probabilities, const Vec& weights);

// -sum_i w^s_{y_i} log p_{i, y_i}
double reweighted_ce_loss(const Mat& probabilities,
                          const std::vector<int>& labels, const Vec& ws);

// rce + (eta2 * pe - eta3 * ne) + eta1 * ot
double total_loss(double rce, double pe, double ne, double ot,
                  const LossWeights& weights);

// fraction of confidences >= tau1, clamped to [floor, 1]
double estimate_alpha(const Vec& confidences, double tau1, double floor = 0.0);

// fraction of class weights >= tau2, clamped to [floor, 1]
double estimate_beta(const Vec& source_class, double tau2, double floor = 0.0);

// rate * new_value + (1 - rate) * old_value
double ema_scalar(double new_value, double old_value, double rate);

}  // namespace ppot
