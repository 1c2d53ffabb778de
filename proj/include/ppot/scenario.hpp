#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppot/mat.hpp"
#include "ppot/measure.hpp"
#include "ppot/rng.hpp"

namespace ppot {

// Gaussian-mixture scenario with a controllable split into classes shared by
// both domains, classes private to the source, and classes private to the
// target (which a classifier must reject as "unknown").
struct ScenarioConfig {
  std::size_t n_common = 2;
  std::size_t n_source_private = 1;
  std::size_t n_target_private = 1;
  std::size_t samples_per_class = 50;
  std::size_t feature_dim = 2;
  // adjacent class means are spaced roughly class_separation apart
  double class_separation = 4.0;
  // translation applied to common-class means in the target domain
  double domain_shift = 1.0;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t num_source_classes() const {
    return n_common + n_source_private;
  }
  // hidden label assigned to every target-private sample
  int unknown_label() const { return static_cast<int>(num_source_classes()); }
};

struct ScenarioDataset {
  Mat source_inputs;               // one row per sample
  std::vector<int> source_labels;  // 0 .. n_common+n_source_private-1
  Mat target_inputs;
  std::vector<int> target_hidden_labels;  // privates collapse to unknown_label
  std::vector<int> target_known;          // 1 = common class, 0 = unknown
  double true_alpha = 1.0;  // fraction of target mass in common classes
  double true_beta = 1.0;   // fraction of source classes that are common
};

// Class means sit on a circle of radius class_separation*K/(2*pi) (K = total
// distinct classes) embedded in a seed-dependent 2-D subspace when
// feature_dim > 2; target common-class means are the source means translated
// by domain_shift along the first subspace axis. Deterministic per seed.
ScenarioDataset generate_scenario(const ScenarioConfig& config);

// CSV with header x0..x{D-1},label,domain,known_flag for external plotting.
void export_scenario_csv(const ScenarioDataset& data, const std::string& path);

}  // namespace ppot
