#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ppot/config.hpp"
#include "ppot/net.hpp"
#include "ppot/objectives.hpp"
#include "ppot/prototypes.hpp"
#include "ppot/scenario.hpp"

namespace ppot {

// What anchors the source side of the per-batch transport problem:
// class prototypes (the default) or the raw source batch features (ablation;
// per-class means of the sample weights then stand in for the class weights).
enum class TransportVariant { prototype, sample };

struct TrainOptions {
  TransportVariant variant = TransportVariant::prototype;
  std::string log_path;  // per-iteration CSV when non-empty
};

struct IterationStats {
  std::size_t epoch = 0;
  std::size_t iteration = 0;  // global index
  LossBreakdown losses;
  double alpha = 1.0;
  double beta = 1.0;
  double sum_target_weights = 0.0;   // == batch_size when the plan is fresh
  double sum_class_weights = 0.0;    // == num classes likewise
  // positive entries of w^u after retention == min(ceil(keep_fraction * b),
  // candidates); candidates = targets with w^t < 1 before retention
  std::size_t unknown_nonzeros = 0;
  std::size_t unknown_candidates = 0;
  bool solver_converged = true;
};

struct TrainResult {
  NetworkParams params;
  PrototypeSet bank;
  double alpha = 1.0;
  double beta = 1.0;
  std::vector<IterationStats> history;
  std::size_t solver_failures = 0;
  bool source_only = false;  // true when every transport coefficient was zero
};

// Full training loop. Per epoch the prototypes and the transported-mass
// estimate are recomputed from the complete datasets; per iteration a
// class-balanced source batch and a shuffled target batch are drawn, the
// prototypes get an EMA update, an entropic partial transport between the
// anchors (capped by min(1, alpha/beta) * class mass, total mass alpha) and
// the target batch is solved, the plan-derived weights and the alpha/beta
// EMA estimates are refreshed, and one SGD step runs with the plan and
// prototypes held constant. A non-convergent solve is logged and retried with
// progressively smoother regularization; only if every retry fails are the
// previous plan and weights reused. When all three transport coefficients are
// zero the loop degenerates to plain source-only cross-entropy training.
TrainResult train(const ExperimentConfig& config, const ScenarioDataset& data,
                  const TrainOptions& options = {});

// The exact network train() starts from (same seed derivation); lets callers
// measure pre-training diagnostics against the true starting point.
NetworkParams initial_network(const ExperimentConfig& config);

struct EvalReport {
  // one entry per common class, then unknown recall last
  std::vector<double> per_class_accuracy;
  double common_accuracy = 0.0;   // mean accuracy over common classes
  double private_accuracy = 0.0;  // fraction of private targets rejected
  double h_score = 0.0;
  double overall_accuracy = 0.0;
  // full-data transport diagnostics (exact solve, all target samples)
  double mean_ws_common = 0.0;
  double mean_ws_private = 0.0;
  double mean_wt_known = 0.0;
  double mean_wt_unknown = 0.0;
};

// 2ab/(a+b), zero when both accuracies vanish
double h_score(double common_accuracy, double private_accuracy);

// Target samples whose max softmax falls below config.xi are predicted
// "unknown", the rest take the argmax class. alpha/beta are the trained mass
// estimates used for the full-data weight diagnostics. Scenarios without
// target-private classes report private_accuracy = 0 and h_score = 0.
EvalReport evaluate(const NetworkParams& params, const ScenarioDataset& data,
                    const ExperimentConfig& config, double alpha, double beta);

struct AlignmentReport {
  double pot_full = 0.0;   // partial cost, all samples, transported mass s
  double ot_common = 0.0;  // balanced cost between the common-class subsets
};

// Feature-space alignment measured with exact solvers; run before and after
// training to see the domain gap close.
AlignmentReport alignment_diagnostic(const NetworkParams& params,
                                     const ScenarioDataset& data,
                                     std::size_t n_common, double s);

struct BoundCheckSummary {
  std::size_t instances = 0;
  std::size_t failures = 0;
};

// Random-instance verification of the two transport bounds (batch average
// upper-bounds the full prototype transport; prototype distances plus the
// batch average upper-bound the sample-level transport), with one CSV row per
// instance when csv_path is non-empty.
BoundCheckSummary run_bound_checks(std::uint64_t seed,
                                   std::size_t n_instances,
                                   const std::string& csv_path);

// name -> values, e.g. parsed from "xi=0.5,0.75;eta1=1,5". Recognized names:
// eta1, eta2, eta3, tau1, tau2, xi, keep_fraction, lambda (sets both EMA
// rates), batch_size.
using SweepGrid = std::vector<std::pair<std::string, std::vector<double>>>;

SweepGrid parse_grid(const std::string& spec);

struct SweepRow {
  std::string settings;
  std::uint64_t seed = 0;
  std::uint64_t hash = 0;  // config hash after overrides
  double h = 0.0;
  double common_accuracy = 0.0;
  double private_accuracy = 0.0;
  double final_alpha = 0.0;
};

// One full train + evaluate per grid point (cartesian product, base config
// otherwise); regenerates the scenario per point so batch-size sweeps stay
// valid. Appends rows to csv_path when non-empty.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                const SweepGrid& grid,
                                TransportVariant variant,
                                const std::string& csv_path);

}  // namespace ppot
