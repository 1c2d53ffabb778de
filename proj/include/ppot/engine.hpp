#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ppot/measure.hpp"
#include "ppot/prototypes.hpp"
#include "ppot/rng.hpp"

namespace ppot {

// Disjoint index batches covering {0..n-1}, each of size b with b | n.
// Batches hold sorted indices (they are sets); with a single batch the
// partition is the identity arrangement.
struct Partition {
  std::vector<std::vector<std::size_t>> batches;
  std::size_t batch_size = 0;

  std::size_t count() const { return batches.size(); }
  std::size_t total() const { return batches.size() * batch_size; }
};

Partition make_partition(std::size_t n, std::size_t b, std::uint64_t seed);

struct PpotResult {
  double cost = 0.0;
  TransportPlan plan;  // rows = prototypes, columns = targets
};

// Prototype partial transport: moves total mass s from the prototype measure
// (masses r) to the uniform measure on the target features (1/n each). Exact
// solver; this is the verification path.
PpotResult ppot(const PrototypeSet& bank,
                const std::vector<Point>& target_features, double s);

// Same transport problem solved entropically; used on the training path where
// speed matters more than exactness.
PpotResult ppot_entropic(const PrototypeSet& bank,
                         const std::vector<Point>& target_features, double s,
                         const SolverConfig& config);

struct MppotResult {
  double cost = 0.0;                      // mean of per-batch costs
  std::vector<TransportPlan> batch_plans; // in partition order
};

// Mini-batch variant: mean of the per-batch prototype transport costs over
// the partition, each batch carrying a uniform measure of total mass one.
MppotResult mppot(const PrototypeSet& bank,
                  const std::vector<Point>& target_features,
                  const Partition& partition, double s);

// Embeds each batch plan into the full L x n column layout (zero columns off
// the batch) and averages. The result is feasible for the full problem: row
// sums <= r, column sums <= 1/n, total mass s.
TransportPlan pad_and_average_plans(const std::vector<TransportPlan>& plans,
                                    const Partition& partition, std::size_t n);

struct BatchBoundResult {
  double lhs = 0.0;  // prototype transport cost on the full target set
  double rhs = 0.0;  // mini-batch average
  bool holds = false;
  MarginalReport padded;  // feasibility of the averaged padded plan
};

// Checks lhs <= rhs + 1e-7 with exact solvers on both sides and verifies the
// averaged padded plan is feasible for the full problem.
BatchBoundResult batch_bound_check(const PrototypeSet& bank,
                                   const std::vector<Point>& target_features,
                                   double s, const Partition& partition);

// S = plan_pc * diag(1/w) * plan_cq. Requires plan_pc column sums == w and
// plan_cq row sums == w; rows/columns with w == 0 must carry no mass.
TransportPlan compose_plans_via_prototypes(const TransportPlan& plan_pc,
                                           const TransportPlan& plan_cq,
                                           const Vec& w, const Mat& cost_pq);

// Explicit feasible plan routing every source sample to its own class
// prototype: entries p_i * w_{y_i} / r_{y_i}. Its cost equals the prototype
// distance term of the bound.
TransportPlan sample_to_prototype_plan(const Vec& p,
                                       const std::vector<int>& labels,
                                       const Vec& w, const Vec& r,
                                       const Mat& cost_pc);

struct BoundReport {
  double pot_value = 0.0;
  double ppot_value = 0.0;
  double mppot_value = 0.0;
  double prototype_distance_term = 0.0;  // sum of (w_{y_i}/r_{y_i}) p_i d_i
  bool bound_satisfied = false;
  double slack = 0.0;  // (term + mppot) - pot
};

// Verifies that sample-level partial transport is bounded by the prototype
// distance term plus the mini-batch prototype transport average, with the
// source measure uniform and w taken from the exact prototype plan's row
// sums. The intermediate composite and explicit plans are validated along
// the way (feasibility and the cost chain); violations throw
// std::runtime_error.
BoundReport transport_bound_check(const std::vector<Point>& source_features,
                                  const std::vector<int>& labels,
                                  const PrototypeSet& bank,
                                  const std::vector<Point>& target_features,
                                  double s, const Partition& partition);

// Random labelled Gaussian instance for the verification suites: feature
// dimension 2..8, L in 2..8 classes, n in 8..32 targets, batch size a random
// divisor of n, transported mass uniform in (0, 1].
struct CheckInstance {
  std::vector<Point> source_features;
  std::vector<int> labels;
  PrototypeSet bank;
  std::vector<Point> target_features;
  double s = 0.0;
  Partition partition;
};

CheckInstance random_check_instance(Rng& rng);

}  // namespace ppot
