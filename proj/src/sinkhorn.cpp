#include "ppot/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ppot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* vals, std::size_t n, std::size_t stride) {
  double mx = kNegInf;
  for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, vals[k * stride]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(vals[k * stride] - mx);
  return mx + std::log(s);
}

}  // namespace

TransportPlan sinkhorn_pot(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const CostMatrix& cost, double s,
                           const SolverConfig& config) {
  mu.validate();
  nu.validate();
  const std::size_t p = mu.size(), q = nu.size();
  if (cost.entries.rows != p || cost.entries.cols != q)
    throw std::invalid_argument("sinkhorn_pot: cost matrix shape mismatch");
  for (double c : cost.entries.data)
    if (std::isnan(c) || std::isinf(c))
      throw std::invalid_argument("sinkhorn_pot: cost must be finite");
  if (!(config.epsilon > 0.0))
    throw std::invalid_argument("sinkhorn_pot: epsilon must be positive");
  if (config.max_iterations <= 0 || !(config.marginal_tolerance > 0.0))
    throw std::invalid_argument("sinkhorn_pot: bad iteration budget/tolerance");
  const double cap = std::min(mu.total_mass(), nu.total_mass());
  if (std::isnan(s) || s < -1e-12 || s > cap + 1e-9)
    throw std::invalid_argument(
        "sinkhorn_pot: mass s outside [0, min(|mu|, |nu|)]");
  s = std::clamp(s, 0.0, cap);

  TransportPlan plan;
  plan.entries = Mat(p, q);
  if (s == 0.0) return plan;

  // Gibbs kernel in log form; everything below works on log(plan) =
  // kernel + la_i + lb_j + lt
  Mat kernel(p, q);
  for (std::size_t k = 0; k < kernel.data.size(); ++k)
    kernel.data[k] = -cost.entries.data[k] / config.epsilon;

  Vec log_mu(p), log_nu(q);
  for (std::size_t i = 0; i < p; ++i)
    log_mu[i] = mu.mass[i] > 0.0 ? std::log(mu.mass[i]) : kNegInf;
  for (std::size_t j = 0; j < q; ++j)
    log_nu[j] = nu.mass[j] > 0.0 ? std::log(nu.mass[j]) : kNegInf;

  // zero-cap rows/columns are satisfied exactly from the start and are
  // excluded from the Dykstra corrections
  Vec la(p, 0.0), lb(q, 0.0), qa(p, 0.0), qb(q, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    if (mu.mass[i] <= 0.0) la[i] = kNegInf;
  for (std::size_t j = 0; j < q; ++j)
    if (nu.mass[j] <= 0.0) lb[j] = kNegInf;
  double lt = 0.0;

  Vec scratch(std::max(p, q));
  Mat flow(p, q);
  double violation = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    double movement = 0.0;
    // project onto row caps: scale each overfull row down to its cap
    for (std::size_t i = 0; i < p; ++i) {
      if (mu.mass[i] <= 0.0) continue;
      for (std::size_t j = 0; j < q; ++j) scratch[j] = kernel(i, j) + lb[j];
      const double lse = log_sum_exp(scratch.data(), q, 1);
      const double row_log_sum = la[i] + qa[i] + lt + lse;
      const double log_scale =
          row_log_sum == kNegInf ? 0.0 : std::min(0.0, log_mu[i] - row_log_sum);
      const double delta = qa[i] + log_scale;
      la[i] += delta;
      qa[i] = -log_scale;
      movement = std::max(movement, std::abs(delta));
    }
    // project onto column caps
    for (std::size_t j = 0; j < q; ++j) {
      if (nu.mass[j] <= 0.0) continue;
      for (std::size_t i = 0; i < p; ++i) scratch[i] = kernel(i, j) + la[i];
      const double lse = log_sum_exp(scratch.data(), p, 1);
      const double col_log_sum = lb[j] + qb[j] + lt + lse;
      const double log_scale =
          col_log_sum == kNegInf ? 0.0 : std::min(0.0, log_nu[j] - col_log_sum);
      const double delta = qb[j] + log_scale;
      lb[j] += delta;
      qb[j] = -log_scale;
      movement = std::max(movement, std::abs(delta));
    }
    // rescale to total mass s; affine constraint, no correction needed
    double log_total = kNegInf;
    {
      double mx = kNegInf;
      for (std::size_t i = 0; i < p; ++i) {
        if (la[i] == kNegInf) continue;
        for (std::size_t j = 0; j < q; ++j) {
          const double v = kernel(i, j) + la[i] + lb[j];
          if (v > mx) mx = v;
        }
      }
      if (mx > kNegInf) {
        double acc = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
          if (la[i] == kNegInf) continue;
          for (std::size_t j = 0; j < q; ++j)
            acc += std::exp(kernel(i, j) + la[i] + lb[j] - mx);
        }
        log_total = mx + std::log(acc);
      }
      if (log_total == kNegInf)
        throw SolverError("sinkhorn_pot: kernel mass vanished", violation);
      const double shift = std::log(s) - (lt + log_total);
      lt += shift;
      movement = std::max(movement, std::abs(shift));
    }

    // materialize and measure the one-sided cap violations
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j)
        flow(i, j) = std::exp(kernel(i, j) + la[i] + lb[j] + lt);
    violation = 0.0;
    const Vec rs = flow.row_sums();
    for (std::size_t i = 0; i < p; ++i)
      violation = std::max(violation, rs[i] - mu.mass[i]);
    const Vec cs = flow.col_sums();
    for (std::size_t j = 0; j < q; ++j)
      violation = std::max(violation, cs[j] - nu.mass[j]);
    const bool settled = config.stationarity_tolerance <= 0.0 ||
                         movement < config.stationarity_tolerance;
    if (violation < config.marginal_tolerance && settled) {
      plan.entries = std::move(flow);
      plan.total_mass = plan.entries.sum();
      plan.objective = dot(plan.entries, cost.entries);
      return plan;
    }
  }
  throw SolverError("sinkhorn_pot: no convergence after " +
                        std::to_string(config.max_iterations) +
                        " iterations, violation " + std::to_string(violation),
                    violation);
}

}  // namespace ppot
