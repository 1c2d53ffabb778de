#include "ppot/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ppot/exact_ot.hpp"
#include "ppot/sinkhorn.hpp"

namespace ppot {

namespace {

DiscreteMeasure uniform_on(const std::vector<Point>& pts) {
  return uniform_measure(pts);
}

std::vector<Point> gather(const std::vector<Point>& pts,
                          const std::vector<std::size_t>& idx) {
  std::vector<Point> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i >= pts.size())
      throw std::invalid_argument("partition index out of range");
    out.push_back(pts[i]);
  }
  return out;
}

void validate_partition(const Partition& partition, std::size_t n) {
  if (partition.batch_size == 0 || partition.batches.empty())
    throw std::invalid_argument("partition: empty");
  std::vector<char> seen(n, 0);
  for (const auto& batch : partition.batches) {
    if (batch.size() != partition.batch_size)
      throw std::invalid_argument("partition: batch size mismatch");
    for (std::size_t i : batch) {
      if (i >= n || seen[i])
        throw std::invalid_argument("partition: not a disjoint cover");
      seen[i] = 1;
    }
  }
  if (partition.total() != n)
    throw std::invalid_argument("partition: does not cover all indices");
}

}  // namespace

Partition make_partition(std::size_t n, std::size_t b, std::uint64_t seed) {
  if (n == 0 || b == 0 || n % b != 0)
    throw std::invalid_argument("make_partition: batch size must divide n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  Partition part;
  part.batch_size = b;
  part.batches.resize(n / b);
  for (std::size_t k = 0; k < part.batches.size(); ++k) {
    auto& batch = part.batches[k];
    batch.assign(idx.begin() + k * b, idx.begin() + (k + 1) * b);
    std::sort(batch.begin(), batch.end());  // batches are index sets
  }
  return part;
}

PpotResult ppot(const PrototypeSet& bank,
                const std::vector<Point>& target_features, double s) {
  const DiscreteMeasure c = prototype_measure(bank);
  const DiscreteMeasure q = uniform_on(target_features);
  const CostMatrix cost = build_cost_matrix(c.support, q.support);
  PpotResult res;
  res.plan = solve_exact_pot(c, q, cost, s);
  res.cost = res.plan.objective;
  return res;
}

PpotResult ppot_entropic(const PrototypeSet& bank,
                         const std::vector<Point>& target_features, double s,
                         const SolverConfig& config) {
  const DiscreteMeasure c = prototype_measure(bank);
  const DiscreteMeasure q = uniform_on(target_features);
  const CostMatrix cost = build_cost_matrix(c.support, q.support);
  PpotResult res;
  res.plan = sinkhorn_pot(c, q, cost, s, config);
  res.cost = res.plan.objective;
  return res;
}

MppotResult mppot(const PrototypeSet& bank,
                  const std::vector<Point>& target_features,
                  const Partition& partition, double s) {
  validate_partition(partition, target_features.size());
  const DiscreteMeasure c = prototype_measure(bank);
  MppotResult res;
  res.batch_plans.reserve(partition.count());
  double acc = 0.0;
  for (const auto& batch : partition.batches) {
    const DiscreteMeasure q = uniform_on(gather(target_features, batch));
    const CostMatrix cost = build_cost_matrix(c.support, q.support);
    res.batch_plans.push_back(solve_exact_pot(c, q, cost, s));
    acc += res.batch_plans.back().objective;
  }
  res.cost = acc / static_cast<double>(partition.count());
  return res;
}

TransportPlan pad_and_average_plans(const std::vector<TransportPlan>& plans,
                                    const Partition& partition, std::size_t n) {
  validate_partition(partition, n);
  if (plans.size() != partition.count())
    throw std::invalid_argument("pad_and_average_plans: plan count mismatch");
  const std::size_t rows = plans.empty() ? 0 : plans.front().entries.rows;
  TransportPlan out;
  out.entries = Mat(rows, n);
  const double inv_k = 1.0 / static_cast<double>(plans.size());
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const Mat& pi = plans[k].entries;
    if (pi.rows != rows || pi.cols != partition.batch_size)
      throw std::invalid_argument("pad_and_average_plans: plan shape mismatch");
    const auto& batch = partition.batches[k];
    for (std::size_t l = 0; l < rows; ++l)
      for (std::size_t t = 0; t < batch.size(); ++t)
        out.entries(l, batch[t]) += inv_k * pi(l, t);
  }
  out.total_mass = out.entries.sum();
  return out;
}

BatchBoundResult batch_bound_check(const PrototypeSet& bank,
                                   const std::vector<Point>& target_features,
                                   double s, const Partition& partition) {
  BatchBoundResult res;
  res.lhs = ppot(bank, target_features, s).cost;
  const MppotResult mp = mppot(bank, target_features, partition, s);
  res.rhs = mp.cost;
  const TransportPlan padded =
      pad_and_average_plans(mp.batch_plans, partition, target_features.size());
  const Vec q(target_features.size(), 1.0 / static_cast<double>(target_features.size()));
  res.padded = partial_feasibility(padded, bank.class_mass, q, s);
  res.holds = res.lhs <= res.rhs + 1e-7;
  return res;
}

TransportPlan compose_plans_via_prototypes(const TransportPlan& plan_pc,
                                           const TransportPlan& plan_cq,
                                           const Vec& w, const Mat& cost_pq) {
  const Mat& a = plan_pc.entries;
  const Mat& b = plan_cq.entries;
  if (a.cols != w.size() || b.rows != w.size())
    throw std::invalid_argument("compose_plans_via_prototypes: shape mismatch");
  if (cost_pq.rows != a.rows || cost_pq.cols != b.cols)
    throw std::invalid_argument(
        "compose_plans_via_prototypes: cost shape mismatch");
  const Vec a_cols = a.col_sums();
  const Vec b_rows = b.row_sums();
  TransportPlan out;
  out.entries = Mat(a.rows, b.cols);
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] <= 0.0) {
      // a zero-weight prototype must be unused on both sides
      if (a_cols[k] > 1e-12 || b_rows[k] > 1e-12)
        throw std::invalid_argument(
            "compose_plans_via_prototypes: zero weight with nonzero mass");
      continue;
    }
    const double inv = 1.0 / w[k];
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double left = a(i, k);
      if (left == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j)
        out.entries(i, j) += left * inv * b(k, j);
    }
  }
  out.total_mass = out.entries.sum();
  out.objective = dot(out.entries, cost_pq);
  return out;
}

TransportPlan sample_to_prototype_plan(const Vec& p,
                                       const std::vector<int>& labels,
                                       const Vec& w, const Vec& r,
                                       const Mat& cost_pc) {
  if (p.size() != labels.size() || w.size() != r.size())
    throw std::invalid_argument("sample_to_prototype_plan: size mismatch");
  if (cost_pc.rows != p.size() || cost_pc.cols != w.size())
    throw std::invalid_argument(
        "sample_to_prototype_plan: cost shape mismatch");
  TransportPlan out;
  out.entries = Mat(p.size(), w.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    if (y >= w.size())
      throw std::invalid_argument(
          "sample_to_prototype_plan: label out of range");
    if (r[y] <= 0.0)
      throw std::invalid_argument("sample_to_prototype_plan: empty class mass");
    out.entries(i, y) = p[i] * w[y] / r[y];
  }
  out.total_mass = out.entries.sum();
  out.objective = dot(out.entries, cost_pc);
  return out;
}

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::runtime_error(what);
}

}  // namespace

BoundReport transport_bound_check(const std::vector<Point>& source_features,
                                  const std::vector<int>& labels,
                                  const PrototypeSet& bank,
                                  const std::vector<Point>& target_features,
                                  double s, const Partition& partition) {
  if (source_features.size() != labels.size() || source_features.empty())
    throw std::invalid_argument("transport_bound_check: bad source inputs");
  const std::size_t m = source_features.size();
  const std::size_t L = bank.size();
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= L)
      throw std::invalid_argument("transport_bound_check: label out of range");

  BoundReport report;

  // full-problem value: POT^s between uniform source and uniform target
  const DiscreteMeasure p = uniform_on(source_features);
  const DiscreteMeasure q = uniform_on(target_features);
  const CostMatrix cost_pq = build_cost_matrix(source_features, target_features);
  const TransportPlan pot_plan = solve_exact_pot(p, q, cost_pq, s);
  report.pot_value = pot_plan.objective;

  // prototype side: w is the row-sum vector of the optimal PPOT plan
  const PpotResult ppot_res = ppot(bank, target_features, s);
  report.ppot_value = ppot_res.cost;
  const Vec w = ppot_res.plan.row_sums();

  const MppotResult mp = mppot(bank, target_features, partition, s);
  report.mppot_value = mp.cost;

  // distance of every source sample to its own class prototype
  Vec d(m);
  for (std::size_t i = 0; i < m; ++i)
    d[i] = euclidean_distance(source_features[i],
                              bank.prototypes[static_cast<std::size_t>(labels[i])]);
  double term = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    if (bank.class_mass[y] <= 0.0)
      throw std::invalid_argument("transport_bound_check: empty class in bank");
    term += (w[y] / bank.class_mass[y]) * p.mass[i] * d[i];
  }
  report.prototype_distance_term = term;

  // consistency of the two intermediate constructions backing the bound:
  // (a) the explicit source-to-own-prototype plan realises the distance term
  //     and dominates POT^s(p, c_bar) where c_bar weights prototypes by w
  const CostMatrix cost_pc = build_cost_matrix(source_features, bank.prototypes);
  const TransportPlan explicit_plan =
      sample_to_prototype_plan(p.mass, labels, w, bank.class_mass,
                               cost_pc.entries);
  require(std::abs(explicit_plan.objective - term) <= 1e-9,
          "transport_bound_check: explicit plan cost drifted from the distance "
          "term");
  {
    const Vec rows = explicit_plan.row_sums();
    for (std::size_t i = 0; i < m; ++i)
      require(rows[i] <= p.mass[i] + 1e-9,
              "transport_bound_check: explicit plan exceeds a row cap");
    const Vec cols = explicit_plan.col_sums();
    for (std::size_t k = 0; k < L; ++k)
      require(std::abs(cols[k] - w[k]) <= 1e-9,
              "transport_bound_check: explicit plan misses a column weight");
  }
  double s_w = 0.0;
  for (double v : w) s_w += v;
  DiscreteMeasure c_bar;
  c_bar.support = bank.prototypes;
  c_bar.mass = w;
  const TransportPlan pot_pc = solve_exact_pot(p, c_bar, cost_pc, s_w);
  require(pot_pc.objective <= explicit_plan.objective + 1e-9,
          "transport_bound_check: explicit plan undercuts POT(p, c_bar)");

  // (b) the composite plan is feasible for the full problem and its cost is
  //     sandwiched by the triangle chain
  const TransportPlan composite =
      compose_plans_via_prototypes(pot_pc, ppot_res.plan, w, cost_pq.entries);
  const MarginalReport comp_rep =
      partial_feasibility(composite, p.mass, q.mass, s_w);
  require(comp_rep.worst() <= 1e-9,
          "transport_bound_check: composite plan infeasible");
  require(report.pot_value <= composite.objective + 1e-9,
          "transport_bound_check: composite plan undercuts the exact POT value");
  require(composite.objective <=
              pot_pc.objective + ppot_res.cost + 1e-9,
          "transport_bound_check: composite cost exceeds the triangle bound");

  report.slack = report.prototype_distance_term + report.mppot_value -
                 report.pot_value;
  report.bound_satisfied = report.slack >= -1e-7;
  return report;
}

CheckInstance random_check_instance(Rng& rng) {
  CheckInstance inst;
  const std::size_t L = 2 + rng.below(7);
  const std::size_t dim = 2 + rng.below(7);
  const std::size_t n = 8 + rng.below(25);
  const std::size_t m_low = std::max<std::size_t>(L, 8);
  const std::size_t m = m_low + rng.below(33 - m_low);

  std::vector<Point> centers(L, Point(dim));
  for (auto& c : centers)
    for (double& x : c) x = rng.normal(0.0, 2.0);

  inst.labels.resize(m);
  inst.source_features.assign(m, Point(dim));
  for (std::size_t i = 0; i < m; ++i) {
    // first L samples pin one per class so every prototype exists
    const std::size_t y = i < L ? i : rng.below(L);
    inst.labels[i] = static_cast<int>(y);
    for (std::size_t k = 0; k < dim; ++k)
      inst.source_features[i][k] = centers[y][k] + rng.normal(0.0, 1.0);
  }
  inst.bank = compute_prototypes(inst.source_features, inst.labels, L);

  Point shift(dim);
  for (double& x : shift) x = rng.normal(0.0, 1.0);
  inst.target_features.assign(n, Point(dim));
  for (std::size_t j = 0; j < n; ++j) {
    if (rng.uniform() < 0.5) {
      const std::size_t y = rng.below(L);
      for (std::size_t k = 0; k < dim; ++k)
        inst.target_features[j][k] = centers[y][k] + shift[k] + rng.normal(0.0, 1.0);
    } else {
      for (std::size_t k = 0; k < dim; ++k)
        inst.target_features[j][k] = rng.normal(0.0, 3.0);
    }
  }

  inst.s = 1.0 - rng.uniform();  // uniform in (0, 1]
  std::vector<std::size_t> divisors;
  for (std::size_t b = 1; b <= n; ++b)
    if (n % b == 0) divisors.push_back(b);
  const std::size_t b = divisors[rng.below(divisors.size())];
  inst.partition = make_partition(n, b, rng.next_u64());
  return inst;
}

}  // namespace ppot
