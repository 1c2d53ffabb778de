#pragma once

#include <cstddef>
#include <vector>

#include "ppot/measure.hpp"

namespace ppot {

// Balanced optimal transport between mu and nu (totals must agree to 1e-9),
// solved exactly with the transportation simplex. Deterministic: identical
// inputs give bit-identical plans.
TransportPlan solve_exact_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const CostMatrix& cost);

// Partial optimal transport: row sums <= mu.mass, column sums <= nu.mass and
// exactly mass s is moved. Reduced to a balanced problem by appending one
// dummy row and one dummy column that absorb the untransported mass; the
// dummy/dummy corner is priced high enough that no spurious mass flows
// through it. s must lie in [0, min(|mu|, |nu|)].
TransportPlan solve_exact_pot(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              const CostMatrix& cost, double s);

// Mini-batch OT estimate: average of exact OT costs over paired index batches
// (source_batches[i] against target_batches[i]), each batch renormalized to a
// probability measure. Batch lists must have equal length and every batch must
// carry positive mass.
double minibatch_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    const std::vector<std::vector<std::size_t>>& source_batches,
                    const std::vector<std::vector<std::size_t>>& target_batches);

}  // namespace ppot
