#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "ppot/exact_ot.hpp"
#include "ppot/scenario.hpp"

using namespace ppot;

TEST_CASE("scenario counting and truth ratios") {
  ScenarioConfig cfg;
  cfg.n_common = 2;
  cfg.n_source_private = 1;
  cfg.n_target_private = 1;
  cfg.samples_per_class = 50;
  cfg.seed = 3;
  const ScenarioDataset data = generate_scenario(cfg);

  CHECK(data.source_inputs.rows == 150);
  CHECK(data.target_inputs.rows == 150);
  std::set<int> source_label_set(data.source_labels.begin(),
                                 data.source_labels.end());
  CHECK(source_label_set == std::set<int>{0, 1, 2});
  int unknown = 0;
  for (std::size_t i = 0; i < data.target_known.size(); ++i) {
    if (!data.target_known[i]) {
      ++unknown;
      CHECK(data.target_hidden_labels[i] == cfg.unknown_label());
    } else {
      CHECK(data.target_hidden_labels[i] < static_cast<int>(cfg.n_common));
    }
  }
  CHECK(unknown == 50);
  CHECK(data.true_alpha == doctest::Approx(2.0 / 3.0));
  CHECK(data.true_beta == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("closed-set scenario has full overlap") {
  ScenarioConfig cfg;
  cfg.n_common = 3;
  cfg.n_source_private = 0;
  cfg.n_target_private = 0;
  cfg.samples_per_class = 10;
  const ScenarioDataset data = generate_scenario(cfg);
  CHECK(data.true_alpha == 1.0);
  CHECK(data.true_beta == 1.0);
  for (int flag : data.target_known) CHECK(flag == 1);
}

TEST_CASE("generation is deterministic per seed") {
  ScenarioConfig cfg;
  cfg.n_common = 4;
  cfg.n_source_private = 2;
  cfg.n_target_private = 2;
  cfg.samples_per_class = 7;
  cfg.feature_dim = 6;
  cfg.seed = 99;
  const ScenarioDataset a = generate_scenario(cfg);
  const ScenarioDataset b = generate_scenario(cfg);
  CHECK(a.source_inputs.data == b.source_inputs.data);
  CHECK(a.target_inputs.data == b.target_inputs.data);
  CHECK(a.source_labels == b.source_labels);
  cfg.seed = 100;
  const ScenarioDataset c = generate_scenario(cfg);
  CHECK(a.source_inputs.data != c.source_inputs.data);
}

TEST_CASE("class means are separated") {
  ScenarioConfig cfg;
  cfg.n_common = 6;
  cfg.n_source_private = 3;
  cfg.n_target_private = 3;
  cfg.samples_per_class = 20;
  cfg.class_separation = 6.0;
  cfg.noise_sigma = 1e-6;  // per-class sample means approximate the true means
  cfg.feature_dim = 5;
  cfg.seed = 7;
  const ScenarioDataset data = generate_scenario(cfg);
  const std::size_t L = cfg.num_source_classes();
  std::vector<Point> means(L, Point(cfg.feature_dim, 0.0));
  std::vector<int> counts(L, 0);
  for (std::size_t i = 0; i < data.source_inputs.rows; ++i) {
    const int y = data.source_labels[i];
    counts[y]++;
    for (std::size_t d = 0; d < cfg.feature_dim; ++d)
      means[y][d] += data.source_inputs(i, d);
  }
  for (std::size_t k = 0; k < L; ++k)
    for (double& x : means[k]) x /= counts[k];
  // adjacent circle chords: 2R sin(pi/K) with R = sep*K/(2 pi) >= 0.6*sep
  for (std::size_t a = 0; a < L; ++a)
    for (std::size_t b = a + 1; b < L; ++b)
      CHECK(euclidean_distance(means[a], means[b]) >
            0.6 * cfg.class_separation);
}

TEST_CASE("no shift and vanishing noise make common-class transport free") {
  ScenarioConfig cfg;
  cfg.n_common = 2;
  cfg.n_source_private = 1;
  cfg.n_target_private = 1;
  cfg.samples_per_class = 5;
  cfg.domain_shift = 0.0;
  cfg.noise_sigma = 1e-9;
  cfg.seed = 21;
  const ScenarioDataset data = generate_scenario(cfg);

  // class-balanced common subsets: first 10 source rows and first 10 target
  // rows are the two common classes by construction
  std::vector<Point> src, tgt;
  for (std::size_t i = 0; i < 10; ++i) {
    Point a(cfg.feature_dim), b(cfg.feature_dim);
    for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
      a[d] = data.source_inputs(i, d);
      b[d] = data.target_inputs(i, d);
    }
    src.push_back(a);
    tgt.push_back(b);
  }
  const DiscreteMeasure p = uniform_measure(src);
  const DiscreteMeasure q = uniform_measure(tgt);
  const CostMatrix cost = build_cost_matrix(src, tgt);
  const TransportPlan plan = solve_exact_pot(p, q, cost, 0.8);
  CHECK(plan.objective < 1e-6);
}

TEST_CASE("invalid configurations are rejected") {
  ScenarioConfig cfg;
  cfg.n_common = 0;
  CHECK_THROWS_AS(generate_scenario(cfg), std::invalid_argument);
  cfg = ScenarioConfig{};
  cfg.noise_sigma = 0.0;
  CHECK_THROWS_AS(generate_scenario(cfg), std::invalid_argument);
  cfg = ScenarioConfig{};
  cfg.feature_dim = 1;
  CHECK_THROWS_AS(generate_scenario(cfg), std::invalid_argument);
  cfg = ScenarioConfig{};
  cfg.samples_per_class = 0;
  CHECK_THROWS_AS(generate_scenario(cfg), std::invalid_argument);
}

TEST_CASE("csv export writes every row with the advertised schema") {
  ScenarioConfig cfg;
  cfg.n_common = 2;
  cfg.n_source_private = 1;
  cfg.n_target_private = 1;
  cfg.samples_per_class = 3;
  cfg.seed = 5;
  const ScenarioDataset data = generate_scenario(cfg);
  const std::string path = "scenario_dump.csv";
  export_scenario_csv(data, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x0,x1,label,domain,known_flag");
  std::size_t rows = 0, unknown_rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find(",target,0") != std::string::npos) ++unknown_rows;
  }
  in.close();
  std::remove(path.c_str());
  CHECK(rows == data.source_inputs.rows + data.target_inputs.rows);
  CHECK(unknown_rows == 3);
}
