#include <cmath>
#include <cstring>

#include "doctest.h"
#include "ppot/exact_ot.hpp"
#include "ppot/sinkhorn.hpp"
#include "test_support.hpp"

using namespace ppot;

namespace {

struct Instance {
  DiscreteMeasure mu, nu;
  CostMatrix cost;
  double s;
};

Instance random_instance(Rng& rng, std::size_t m, std::size_t n, double frac) {
  Instance inst;
  const auto src = testsupport::random_points(rng, m, 2, 2.0);
  const auto tgt = testsupport::random_points(rng, n, 2, 2.0);
  inst.mu = weighted_measure(src, testsupport::random_masses(rng, m, 1.0));
  inst.nu = weighted_measure(tgt, testsupport::random_masses(rng, n, 1.0));
  inst.cost = build_cost_matrix(src, tgt);
  inst.s = frac * std::min(inst.mu.total_mass(), inst.nu.total_mass());
  return inst;
}

}  // namespace

TEST_CASE("constant cost makes every feasible plan optimal") {
  const std::vector<Point> pts = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
  const DiscreteMeasure mu = uniform_measure(pts);
  const DiscreteMeasure nu = uniform_measure(pts);
  CostMatrix c;
  c.entries = Mat(3, 3, 2.5);
  SolverConfig cfg;
  const TransportPlan plan = sinkhorn_pot(mu, nu, c, 0.4, cfg);
  CHECK(plan.objective == doctest::Approx(2.5 * 0.4).epsilon(1e-10));
  CHECK(plan.total_mass == doctest::Approx(0.4).epsilon(1e-13));
}

TEST_CASE("entropic plan approaches the exact partial optimum") {
  Rng rng(52);
  const Instance inst = random_instance(rng, 10, 7, 0.4);
  const TransportPlan exact = solve_exact_pot(inst.mu, inst.nu, inst.cost, inst.s);

  SolverConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.max_iterations = 200000;
  const TransportPlan ent = sinkhorn_pot(inst.mu, inst.nu, inst.cost, inst.s, cfg);

  CHECK(ent.objective >= exact.objective - 1e-9);
  CHECK(std::abs(ent.objective - exact.objective) <
        0.01 * std::max(std::abs(exact.objective), 1e-12));
  const MarginalReport rep =
      partial_feasibility(ent, inst.mu.mass, inst.nu.mass, inst.s);
  CHECK(rep.row_violation < 1e-9);
  CHECK(rep.col_violation < 1e-9);
  CHECK(rep.total_violation < 1e-12);
}

TEST_CASE("fixed-point stop refines plans the first-feasible stop leaves short") {
  // at sharp epsilon the first feasible iterate can still misplace mass on
  // near-tie arcs; requiring scaling stationarity must close that gap (the
  // fixed point optimizes the regularized cost, so allow noise-level slack)
  Rng rng(404);
  SolverConfig fast;
  fast.epsilon = 1e-3;
  fast.max_iterations = 2000000;
  fast.marginal_tolerance = 1e-10;
  SolverConfig settled = fast;
  settled.stationarity_tolerance = 1e-8;
  double best_improvement = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto src = testsupport::random_points(rng, 10, 2, 2.0);
    const auto tgt = testsupport::random_points(rng, 10, 2, 2.0);
    const DiscreteMeasure mu =
        weighted_measure(src, testsupport::random_masses(rng, 10, 1.0));
    const DiscreteMeasure nu =
        weighted_measure(tgt, testsupport::random_masses(rng, 10, 1.0));
    const CostMatrix cost = build_cost_matrix(mu.support, nu.support);
    const double s = rng.uniform(0.4, 0.9);
    const double exact = solve_exact_pot(mu, nu, cost, s).objective;
    const double loose = sinkhorn_pot(mu, nu, cost, s, fast).objective;
    const TransportPlan tight = sinkhorn_pot(mu, nu, cost, s, settled);
    CHECK(tight.objective <= loose + 1e-6);
    CHECK(std::abs(tight.objective - exact) < 1e-3 * std::abs(exact));
    CHECK(partial_feasibility(tight, mu.mass, nu.mass, s).worst() < 1e-9);
    best_improvement = std::max(best_improvement, loose - tight.objective);
  }
  CHECK(best_improvement > 1e-2);
}

TEST_CASE("objective gap shrinks as epsilon decreases") {
  Rng rng(99);
  const Instance inst = random_instance(rng, 8, 8, 0.5);
  const double exact = solve_exact_pot(inst.mu, inst.nu, inst.cost, inst.s).objective;
  SolverConfig coarse, fine;
  coarse.epsilon = 0.3;
  coarse.max_iterations = 100000;
  fine.epsilon = 0.003;
  fine.max_iterations = 200000;
  const double gap_coarse =
      sinkhorn_pot(inst.mu, inst.nu, inst.cost, inst.s, coarse).objective - exact;
  const double gap_fine =
      sinkhorn_pot(inst.mu, inst.nu, inst.cost, inst.s, fine).objective - exact;
  CHECK(gap_coarse >= -1e-9);
  CHECK(gap_fine >= -1e-9);
  CHECK(gap_fine < gap_coarse);
}

TEST_CASE("total mass is hit to machine precision") {
  Rng rng(123);
  for (double frac : {0.1, 0.5, 0.9}) {
    const Instance inst = random_instance(rng, 6, 9, frac);
    SolverConfig cfg;
    const TransportPlan plan = sinkhorn_pot(inst.mu, inst.nu, inst.cost, inst.s, cfg);
    CHECK(std::abs(plan.total_mass - inst.s) < 1e-13);
  }
}

TEST_CASE("zero-mass atoms stay empty") {
  const std::vector<Point> src = {{0.0}, {1.0}};
  const std::vector<Point> tgt = {{0.5}, {2.0}};
  const DiscreteMeasure mu = weighted_measure(src, {0.5, 0.5});
  const DiscreteMeasure nu = weighted_measure(tgt, {1.0, 0.0});
  const CostMatrix c = build_cost_matrix(src, tgt);
  SolverConfig cfg;
  const TransportPlan plan = sinkhorn_pot(mu, nu, c, 0.7, cfg);
  CHECK(plan.entries(0, 1) == 0.0);
  CHECK(plan.entries(1, 1) == 0.0);
}

TEST_CASE("s = 0 returns the empty plan without iterating") {
  const DiscreteMeasure mu = uniform_measure({{0.0}, {1.0}});
  const CostMatrix c = build_cost_matrix(mu.support, mu.support);
  SolverConfig cfg;
  cfg.max_iterations = 1;
  const TransportPlan plan = sinkhorn_pot(mu, mu, c, 0.0, cfg);
  CHECK(plan.total_mass == 0.0);
  CHECK(plan.objective == 0.0);
}

TEST_CASE("repeated runs are bit-identical") {
  Rng rng(4096);
  const Instance inst = random_instance(rng, 7, 7, 0.6);
  SolverConfig cfg;
  const TransportPlan a = sinkhorn_pot(inst.mu, inst.nu, inst.cost, inst.s, cfg);
  const TransportPlan b = sinkhorn_pot(inst.mu, inst.nu, inst.cost, inst.s, cfg);
  CHECK(std::memcmp(a.entries.data.data(), b.entries.data.data(),
                    a.entries.data.size() * sizeof(double)) == 0);
}

TEST_CASE("exhausted budget reports the final violation") {
  Rng rng(5);
  const Instance inst = random_instance(rng, 5, 5, 0.9);
  SolverConfig cfg;
  cfg.max_iterations = 1;
  cfg.marginal_tolerance = 1e-15;
  CHECK_THROWS_AS(sinkhorn_pot(inst.mu, inst.nu, inst.cost, inst.s, cfg),
                  SolverError);
  try {
    sinkhorn_pot(inst.mu, inst.nu, inst.cost, inst.s, cfg);
  } catch (const SolverError& err) {
    CHECK(err.final_violation > 0.0);
  }
}

TEST_CASE("sinkhorn rejects malformed inputs") {
  const DiscreteMeasure mu = uniform_measure({{0.0}, {1.0}});
  const CostMatrix c = build_cost_matrix(mu.support, mu.support);
  SolverConfig cfg;
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(sinkhorn_pot(mu, mu, c, 0.5, cfg), std::invalid_argument);
  SolverConfig ok;
  CHECK_THROWS_AS(sinkhorn_pot(mu, mu, c, 1.5, ok), std::invalid_argument);
  CHECK_THROWS_AS(sinkhorn_pot(mu, mu, c, -0.2, ok), std::invalid_argument);
}
