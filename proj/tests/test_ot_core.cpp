#include <cmath>
#include <cstring>

#include "doctest.h"
#include "ppot/exact_ot.hpp"
#include "test_support.hpp"

using namespace ppot;

namespace {

DiscreteMeasure points1d(std::initializer_list<double> xs) {
  std::vector<Point> pts;
  for (double x : xs) pts.push_back({x});
  return uniform_measure(std::move(pts));
}

}  // namespace

TEST_CASE("cost matrix holds pairwise Euclidean distances") {
  const std::vector<Point> src = {{0.0, 0.0}, {1.0, 0.0}};
  const std::vector<Point> tgt = {{0.0, 1.0}};
  const CostMatrix c = build_cost_matrix(src, tgt);
  CHECK(c.entries.rows == 2);
  CHECK(c.entries.cols == 1);
  CHECK(c.entries(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.entries(1, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("exact OT on hand-solved instances") {
  SUBCASE("identical supports cost zero") {
    const DiscreteMeasure mu = points1d({0.0, 2.0});
    const CostMatrix c = build_cost_matrix(mu.support, mu.support);
    const TransportPlan plan = solve_exact_ot(mu, mu, c);
    CHECK(plan.objective == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(plan.total_mass == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two points onto one") {
    const DiscreteMeasure mu = points1d({0.0, 2.0});
    const DiscreteMeasure nu = points1d({1.0});
    const CostMatrix c = build_cost_matrix(mu.support, nu.support);
    const TransportPlan plan = solve_exact_ot(mu, nu, c);
    CHECK(plan.objective == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(plan.entries(0, 0) == doctest::Approx(0.5));
    CHECK(plan.entries(1, 0) == doctest::Approx(0.5));
  }
  SUBCASE("2x2 with an off-diagonal optimum") {
    const DiscreteMeasure mu = points1d({0.0, 4.0});
    const DiscreteMeasure nu = points1d({1.0, 2.0});
    const CostMatrix c = build_cost_matrix(mu.support, nu.support);
    // pairing 0->1 and 4->2 costs 0.5*1 + 0.5*2 = 1.5; the swap costs 2.5
    const TransportPlan plan = solve_exact_ot(mu, nu, c);
    CHECK(plan.objective == doctest::Approx(1.5).epsilon(1e-12));
  }
}

TEST_CASE("exact OT matches the vertex-enumeration oracle") {
  Rng rng(20240817);
  for (int inst = 0; inst < 30; ++inst) {
    const std::size_t m = 1 + rng.below(4), n = 1 + rng.below(4);
    const auto src = testsupport::random_points(rng, m, 2, 2.0);
    const auto tgt = testsupport::random_points(rng, n, 2, 2.0);
    const double total = rng.uniform(0.5, 2.0);
    const DiscreteMeasure mu = weighted_measure(src, testsupport::random_masses(rng, m, total));
    const DiscreteMeasure nu = weighted_measure(tgt, testsupport::random_masses(rng, n, total));
    const CostMatrix c = build_cost_matrix(src, tgt);
    const TransportPlan plan = solve_exact_ot(mu, nu, c);
    const double want = testsupport::oracle_balanced_cost(mu.mass, nu.mass, c.entries);
    CHECK(std::abs(plan.objective - want) < 1e-9);
  }
}

TEST_CASE("partial OT matches the vertex-enumeration oracle") {
  Rng rng(911);
  for (int inst = 0; inst < 40; ++inst) {
    const std::size_t m = 1 + rng.below(4), n = 1 + rng.below(4);
    const auto src = testsupport::random_points(rng, m, 2, 2.0);
    const auto tgt = testsupport::random_points(rng, n, 2, 2.0);
    const DiscreteMeasure mu = weighted_measure(src, testsupport::random_masses(rng, m, rng.uniform(0.5, 1.5)));
    const DiscreteMeasure nu = weighted_measure(tgt, testsupport::random_masses(rng, n, rng.uniform(0.5, 1.5)));
    const CostMatrix c = build_cost_matrix(src, tgt);
    const double cap = std::min(mu.total_mass(), nu.total_mass());
    const double s = rng.uniform(0.0, 1.0) * cap;
    const TransportPlan plan = solve_exact_pot(mu, nu, c, s);
    const double want = testsupport::oracle_pot_cost(mu.mass, nu.mass, c.entries, s);
    CHECK(std::abs(plan.objective - want) < 1e-9);
    const MarginalReport rep = partial_feasibility(plan, mu.mass, nu.mass, s);
    CHECK(rep.worst() < 1e-9);
  }
}

TEST_CASE("partial OT value is monotone in the transported mass") {
  Rng rng(7);
  const auto src = testsupport::random_points(rng, 5, 3, 1.0);
  const auto tgt = testsupport::random_points(rng, 6, 3, 1.0);
  const DiscreteMeasure mu = uniform_measure(src);
  const DiscreteMeasure nu = uniform_measure(tgt);
  const CostMatrix c = build_cost_matrix(src, tgt);
  double prev = 0.0;
  for (double s : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const double v = solve_exact_pot(mu, nu, c, s).objective;
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("partial OT edge cases") {
  const DiscreteMeasure mu = points1d({0.0, 1.0});
  const DiscreteMeasure nu = points1d({0.0, 3.0});
  const CostMatrix c = build_cost_matrix(mu.support, nu.support);

  SUBCASE("s = 0 gives the empty plan") {
    const TransportPlan plan = solve_exact_pot(mu, nu, c, 0.0);
    CHECK(plan.total_mass == 0.0);
    CHECK(plan.objective == 0.0);
  }
  SUBCASE("s = full mass reproduces balanced OT") {
    const TransportPlan partial = solve_exact_pot(mu, nu, c, 1.0);
    const TransportPlan full = solve_exact_ot(mu, nu, c);
    CHECK(partial.objective == doctest::Approx(full.objective).epsilon(1e-12));
  }
  SUBCASE("cheap mass moves first") {
    // sources sit at 0 and 1; moving half the mass uses the free 0 -> 0 arc
    const TransportPlan plan = solve_exact_pot(mu, nu, c, 0.5);
    CHECK(plan.objective == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(plan.entries(0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("identical supports stay feasible even with an all-zero cost") {
    const CostMatrix zero = build_cost_matrix(mu.support, mu.support);
    const TransportPlan plan = solve_exact_pot(mu, mu, zero, 0.3);
    const MarginalReport rep = partial_feasibility(plan, mu.mass, mu.mass, 0.3);
    CHECK(rep.worst() < 1e-12);
  }
}

TEST_CASE("zero-mass atoms produce empty rows") {
  const std::vector<Point> src = {{0.0}, {5.0}};
  const std::vector<Point> tgt = {{0.0}};
  const DiscreteMeasure mu = weighted_measure(src, {1.0, 0.0});
  const DiscreteMeasure nu = weighted_measure(tgt, {1.0});
  const CostMatrix c = build_cost_matrix(src, tgt);
  const TransportPlan plan = solve_exact_ot(mu, nu, c);
  CHECK(plan.entries(1, 0) == 0.0);
  CHECK(plan.objective == doctest::Approx(0.0));
}

TEST_CASE("solver rejects malformed inputs") {
  const DiscreteMeasure mu = points1d({0.0, 1.0});
  const DiscreteMeasure nu = points1d({2.0});
  const CostMatrix c = build_cost_matrix(mu.support, nu.support);

  CHECK_THROWS_AS(solve_exact_pot(mu, nu, c, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(solve_exact_pot(mu, nu, c, 1.1), std::invalid_argument);
  CHECK_THROWS_AS((void)weighted_measure({{0.0}}, {-1.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)weighted_measure({{0.0}}, {1.0, 2.0}), std::invalid_argument);

  DiscreteMeasure heavy = nu;
  heavy.mass[0] = 2.0;
  CHECK_THROWS_AS(solve_exact_ot(mu, heavy, c), std::invalid_argument);

  CostMatrix bad = c;
  bad.entries(0, 0) = std::nan("");
  CHECK_THROWS_AS(solve_exact_ot(mu, nu, bad), std::invalid_argument);

  const CostMatrix wrong = build_cost_matrix(nu.support, mu.support);
  CHECK_THROWS_AS(solve_exact_ot(mu, nu, wrong), std::invalid_argument);
}

TEST_CASE("plans are bit-identical across repeated solves") {
  Rng rng(3131);
  const auto src = testsupport::random_points(rng, 7, 2, 1.5);
  const auto tgt = testsupport::random_points(rng, 9, 2, 1.5);
  const DiscreteMeasure mu = uniform_measure(src);
  const DiscreteMeasure nu = uniform_measure(tgt);
  const CostMatrix c = build_cost_matrix(src, tgt);
  const TransportPlan a = solve_exact_pot(mu, nu, c, 0.6);
  const TransportPlan b = solve_exact_pot(mu, nu, c, 0.6);
  REQUIRE(a.entries.data.size() == b.entries.data.size());
  CHECK(std::memcmp(a.entries.data.data(), b.entries.data.data(),
                    a.entries.data.size() * sizeof(double)) == 0);
  CHECK(a.objective == b.objective);
}

TEST_CASE("mini-batch OT averages per-batch exact costs") {
  const DiscreteMeasure mu = points1d({0.0, 1.0, 2.0, 3.0});
  const DiscreteMeasure nu = points1d({0.0, 1.0, 2.0, 3.0});

  SUBCASE("aligned batches cost nothing") {
    const double v = minibatch_ot(mu, nu, {{0, 1}, {2, 3}}, {{0, 1}, {2, 3}});
    CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("crossed batches pay the displacement") {
    // each batch moves its two points a distance of 2
    const double v = minibatch_ot(mu, nu, {{0, 1}, {2, 3}}, {{2, 3}, {0, 1}});
    CHECK(v == doctest::Approx(2.0));
  }
  SUBCASE("single batch over everything equals plain OT") {
    const double v = minibatch_ot(mu, nu, {{0, 1, 2, 3}}, {{0, 1, 2, 3}});
    const CostMatrix c = build_cost_matrix(mu.support, nu.support);
    CHECK(v == doctest::Approx(solve_exact_ot(mu, nu, c).objective));
  }
  SUBCASE("batch lists must pair up") {
    CHECK_THROWS_AS(minibatch_ot(mu, nu, {{0}}, {{0}, {1}}), std::invalid_argument);
    CHECK_THROWS_AS(minibatch_ot(mu, nu, {{0, 9}}, {{0, 1}}), std::invalid_argument);
  }
}
