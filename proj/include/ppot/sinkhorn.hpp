#pragma once

#include "ppot/measure.hpp"

namespace ppot {

// Entropic partial transport: minimizes <plan, cost> + epsilon * KL(plan | K)
// subject to row sums <= mu.mass, column sums <= nu.mass and total mass s.
// Solved by Dykstra-style alternating KL projections (row caps, column caps,
// total-mass rescaling), run entirely in the log domain so small epsilon stays
// stable. The returned plan's total mass equals s to machine precision because
// the rescaling projection runs last in every cycle.
//
// By default the first iterate whose cap violations are below
// config.marginal_tolerance is returned; such a plan is feasible but, at
// sharp epsilon, can still sit away from the entropic optimum. Setting
// config.stationarity_tolerance > 0 additionally requires the per-cycle
// scaling movement to drop below it, which runs the projections to their
// fixed point at the cost of more cycles.
//
// Throws SolverError carrying the final marginal violation when the iteration
// budget in `config` is exhausted before reaching config.marginal_tolerance.
TransportPlan sinkhorn_pot(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const CostMatrix& cost, double s,
                           const SolverConfig& config);

}  // namespace ppot
