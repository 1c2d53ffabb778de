#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ppot/measure.hpp"
#include "ppot/objectives.hpp"
#include "ppot/scenario.hpp"

namespace ppot {

// Everything a training run needs, loadable from a sectioned key = value
// file. Unknown sections or keys are rejected so typos cannot silently fall
// back to defaults.
struct ExperimentConfig {
  ScenarioConfig scenario;
  SolverConfig solver;
  LossWeights loss_weights;  // eta1 / eta2 / eta3

  // confidence thresholds for the transported-mass estimates
  double tau1 = 0.9;
  double tau2 = 1.0;
  // max-softmax threshold below which a target sample is called unknown
  double xi = 0.75;
  // fraction of the target batch retained as likely-unknown
  double keep_fraction = 0.25;
  // EMA rates for the alpha and beta estimates
  double lambda1 = 0.001;
  double lambda2 = 0.001;
  // EMA rate for prototype updates
  double ema_lambda = 0.1;

  std::size_t epochs = 30;
  std::size_t iters_per_epoch = 50;
  std::size_t batch_size = 24;
  double base_lr = 0.01;

  std::size_t hidden_dim = 32;
  std::size_t bottleneck_dim = 16;

  std::uint64_t seed = 0;

  void validate() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Canonical text form: every field, fixed order, roundtrips exactly.
std::string serialize_config(const ExperimentConfig& config);
void save_config(const ExperimentConfig& config, const std::string& path);

// FNV-1a over the canonical serialization; logged with every result row so
// runs can be traced back to their exact settings.
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace ppot
