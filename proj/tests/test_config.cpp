#include <sstream>

#include "doctest.h"
#include "ppot/config.hpp"

using namespace ppot;

TEST_CASE("defaults serialize and roundtrip exactly") {
  const ExperimentConfig def;
  const std::string text = serialize_config(def);
  std::istringstream in(text);
  const ExperimentConfig back = parse_config(in);
  CHECK(serialize_config(back) == text);
  CHECK(config_hash(back) == config_hash(def));
}

TEST_CASE("parsing applies overrides and tolerates comments") {
  std::istringstream in(
      "# toy run\n"
      "[scenario]\n"
      "n_common = 6\n"
      "n_source_private = 3\n"
      "n_target_private = 3  # open-partial split\n"
      "noise_sigma = 0.75\n"
      "\n"
      "[loss]\n"
      "eta2 = 0.02\n"
      "xi = 0.6\n"
      "[train]\n"
      "batch_size = 27\n"
      "seed = 17\n");
  const ExperimentConfig cfg = parse_config(in);
  CHECK(cfg.scenario.n_common == 6);
  CHECK(cfg.scenario.n_source_private == 3);
  CHECK(cfg.scenario.n_target_private == 3);
  CHECK(cfg.scenario.noise_sigma == 0.75);
  CHECK(cfg.loss_weights.eta2 == 0.02);
  CHECK(cfg.xi == 0.6);
  CHECK(cfg.batch_size == 27);
  CHECK(cfg.seed == 17);
  // untouched keys keep their defaults
  CHECK(cfg.loss_weights.eta1 == 5.0);
  CHECK(cfg.tau1 == 0.9);
  CHECK(cfg.epochs == 30);
}

TEST_CASE("unknown keys and malformed lines are rejected") {
  SUBCASE("unknown key") {
    std::istringstream in("[train]\nbatchsize = 24\n");
    CHECK_THROWS_WITH_AS(parse_config(in),
                         doctest::Contains("unknown key 'batchsize'"),
                         std::invalid_argument);
  }
  SUBCASE("unknown section") {
    std::istringstream in("[trainer]\nbatch_size = 24\n");
    CHECK_THROWS_WITH_AS(parse_config(in),
                         doctest::Contains("unknown section"),
                         std::invalid_argument);
  }
  SUBCASE("key outside any section") {
    std::istringstream in("batch_size = 24\n");
    CHECK_THROWS_AS(parse_config(in), std::invalid_argument);
  }
  SUBCASE("missing equals sign") {
    std::istringstream in("[train]\nbatch_size 24\n");
    CHECK_THROWS_WITH_AS(parse_config(in),
                         doctest::Contains("expected key = value"),
                         std::invalid_argument);
  }
  SUBCASE("garbage number") {
    std::istringstream in("[loss]\neta1 = 5x\n");
    CHECK_THROWS_AS(parse_config(in), std::invalid_argument);
  }
}

TEST_CASE("validation bounds") {
  ExperimentConfig cfg;
  cfg.xi = 1.2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.keep_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.lambda1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.base_lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("hash distinguishes configs") {
  const ExperimentConfig a;
  ExperimentConfig b;
  b.seed = 1;
  ExperimentConfig c;
  c.loss_weights.eta3 = 2.0000001;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(b) != config_hash(c));
}
