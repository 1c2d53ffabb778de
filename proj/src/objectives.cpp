#include "ppot/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ppot {

namespace {

void validate_probabilities(const Mat& p) {
  for (double v : p.data)
    if (!(v >= 0.0))
      throw std::invalid_argument("loss: negative probability");
  const Vec rows = p.row_sums();
  for (double r : rows)
    if (std::abs(r - 1.0) > 1e-6)
      throw std::invalid_argument("loss: rows must sum to one");
}

double floored_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

}  // namespace

Vec target_weights(const TransportPlan& plan, double alpha,
                   std::size_t batch_size) {
  if (!(alpha > 0.0)) throw std::invalid_argument("target_weights: alpha <= 0");
  if (plan.entries.cols != batch_size)
    throw std::invalid_argument("target_weights: plan column count mismatch");
  Vec w = plan.col_sums();
  const double scale = static_cast<double>(batch_size) / alpha;
  for (double& v : w) v *= scale;
  return w;
}

Vec unknown_weights(const Vec& target_known, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("unknown_weights: keep_fraction outside (0, 1]");
  const std::size_t b = target_known.size();
  Vec raw(b);
  for (std::size_t i = 0; i < b; ++i)
    raw[i] = std::max(0.0, 1.0 - target_known[i]);
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(b)));
  std::vector<std::size_t> order(b);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&raw](std::size_t a, std::size_t c) {
    if (raw[a] != raw[c]) return raw[a] > raw[c];
    return a < c;
  });
  Vec out(b, 0.0);
  for (std::size_t k = 0; k < keep && k < b; ++k) out[order[k]] = raw[order[k]];
  return out;
}

Vec source_class_weights(const TransportPlan& plan, double alpha,
                         std::size_t num_classes) {
  if (!(alpha > 0.0))
    throw std::invalid_argument("source_class_weights: alpha <= 0");
  if (plan.entries.rows != num_classes)
    throw std::invalid_argument("source_class_weights: plan row count mismatch");
  Vec w = plan.row_sums();
  const double scale = static_cast<double>(num_classes) / alpha;
  for (double& v : w) v *= scale;
  return w;
}

double reweighted_entropy_loss(const Mat& probabilities, const Vec& weights) {
  validate_probabilities(probabilities);
  if (weights.size() != probabilities.rows)
    throw std::invalid_argument("entropy loss: weight length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.rows; ++i) {
    double h = 0.0;
    for (std::size_t j = 0; j < probabilities.cols; ++j) {
      const double p = probabilities(i, j);
      h += p * floored_log(p);  // p = 0 contributes exactly zero
    }
    acc += weights[i] * h;
  }
  return -acc;
}

double negative_entropy_loss(const Mat& probabilities, const Vec& weights) {
  return reweighted_entropy_loss(probabilities, weights);
}

double reweighted_ce_loss(const Mat& probabilities,
                          const std::vector<int>& labels, const Vec& ws) {
  validate_probabilities(probabilities);
  if (labels.size() != probabilities.rows)
    throw std::invalid_argument("ce loss: label count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= ws.size() ||
        static_cast<std::size_t>(y) >= probabilities.cols)
      throw std::invalid_argument("ce loss: label out of range");
    acc += ws[static_cast<std::size_t>(y)] *
           floored_log(probabilities(i, static_cast<std::size_t>(y)));
  }
  return -acc;
}

double total_loss(double rce, double pe, double ne, double ot,
                  const LossWeights& weights) {
  return rce + (weights.eta2 * pe - weights.eta3 * ne) + weights.eta1 * ot;
}

double estimate_alpha(const Vec& confidences, double tau1, double floor) {
  if (!(tau1 > 0.0 && tau1 <= 1.0))
    throw std::invalid_argument("estimate_alpha: tau1 outside (0, 1]");
  if (confidences.empty())
    throw std::invalid_argument("estimate_alpha: empty confidences");
  std::size_t hits = 0;
  for (double c : confidences)
    if (c >= tau1) ++hits;
  const double frac =
      static_cast<double>(hits) / static_cast<double>(confidences.size());
  return std::clamp(frac, floor, 1.0);
}

double estimate_beta(const Vec& source_class, double tau2, double floor) {
  if (!(tau2 > 0.0))
    throw std::invalid_argument("estimate_beta: tau2 must be positive");
  if (source_class.empty())
    throw std::invalid_argument("estimate_beta: empty weights");
  std::size_t hits = 0;
  for (double w : source_class)
    if (w >= tau2) ++hits;
  const double frac =
      static_cast<double>(hits) / static_cast<double>(source_class.size());
  return std::clamp(frac, floor, 1.0);
}

double ema_scalar(double new_value, double old_value, double rate) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("ema_scalar: rate outside [0, 1)");
  return rate * new_value + (1.0 - rate) * old_value;
}

}  // namespace ppot
