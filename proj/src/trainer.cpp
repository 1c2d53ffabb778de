#include "ppot/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ppot/engine.hpp"
#include "ppot/exact_ot.hpp"
#include "ppot/sinkhorn.hpp"

namespace ppot {

namespace {

std::vector<Point> mat_rows(const Mat& m) {
  std::vector<Point> pts(m.rows, Point(m.cols));
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) pts[i][j] = m(i, j);
  return pts;
}

Mat gather_rows(const Mat& m, const std::vector<std::size_t>& idx) {
  Mat out(idx.size(), m.cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(idx[i], j);
  return out;
}

Vec row_max(const Mat& m) {
  Vec out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      out[i] = std::max(out[i], m(i, j));
  return out;
}

// endless shuffled stream over {0..n-1}; a remainder shorter than one batch
// is dropped and the pool reshuffled
class IndexStream {
 public:
  IndexStream(std::size_t n, std::size_t batch, std::uint64_t seed)
      : rng_(seed), batch_(batch), indices_(n) {
    if (batch == 0 || batch > n)
      throw std::invalid_argument("batch size must be in [1, n]");
    std::iota(indices_.begin(), indices_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (cursor_ + batch_ > indices_.size()) reshuffle();
    std::vector<std::size_t> out(indices_.begin() + cursor_,
                                 indices_.begin() + cursor_ + batch_);
    cursor_ += batch_;
    return out;
  }

 private:
  void reshuffle() {
    rng_.shuffle(indices_);
    cursor_ = 0;
  }

  Rng rng_;
  std::size_t batch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> indices_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix-style decorrelation of per-purpose streams
  std::uint64_t z = seed + salt * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void write_iteration_header(std::ofstream& out) {
  out << "epoch,iteration,rce,pe,ne,ot,total,alpha,beta,sum_wt,sum_ws,"
         "wu_nnz,wu_candidates,solver_converged\n";
}

void write_iteration_row(std::ofstream& out, const IterationStats& s) {
  out << s.epoch << "," << s.iteration << "," << s.losses.rce << ","
      << s.losses.pe << "," << s.losses.ne << "," << s.losses.ot << ","
      << s.losses.total << "," << s.alpha << "," << s.beta << ","
      << s.sum_target_weights << "," << s.sum_class_weights << ","
      << s.unknown_nonzeros << "," << s.unknown_candidates << ","
      << (s.solver_converged ? 1 : 0) << "\n";
}

// class weights for the sample-anchored ablation: per-class mean of the
// per-sample weights (b/alpha) * row_sum, which collapses to
// (L/alpha) * (class row-sum total) for a class-balanced batch
Vec sample_variant_class_weights(const TransportPlan& plan,
                                 const std::vector<int>& batch_labels,
                                 double alpha, std::size_t num_classes) {
  const Vec rows = plan.entries.row_sums();
  Vec per_class(num_classes, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    per_class[batch_labels[i]] += rows[i];
  for (double& v : per_class)
    v *= static_cast<double>(num_classes) / alpha;
  return per_class;
}

std::size_t count_nonzero(const Vec& v) {
  std::size_t n = 0;
  for (double x : v) n += x != 0.0;
  return n;
}

}  // namespace

TrainResult train(const ExperimentConfig& config, const ScenarioDataset& data,
                  const TrainOptions& options) {
  config.validate();
  const std::size_t L = config.scenario.num_source_classes();
  const std::size_t b = config.batch_size;
  const double alpha_floor = 2.0 / static_cast<double>(b);
  const double beta_floor = 1.0 / static_cast<double>(L);
  const bool source_only = config.loss_weights.eta1 == 0.0 &&
                           config.loss_weights.eta2 == 0.0 &&
                           config.loss_weights.eta3 == 0.0;

  TrainResult result;
  result.source_only = source_only;
  result.params = initial_network(config);

  const long total_steps =
      static_cast<long>(config.epochs * config.iters_per_epoch);
  OptimizerState opt = make_optimizer(result.params, config.base_lr, total_steps);

  ClassBalancedSampler sampler(data.source_labels, L, b,
                               derive_seed(config.seed, 2));
  IndexStream target_stream(data.target_inputs.rows, b,
                            derive_seed(config.seed, 3));

  std::ofstream log;
  if (!options.log_path.empty()) {
    log.open(options.log_path);
    if (!log)
      throw std::runtime_error("cannot open " + options.log_path +
                               " for writing");
    log << std::setprecision(17);
    write_iteration_header(log);
  }

  result.alpha = 1.0;
  result.beta = 1.0;
  // carried across iterations so a failed solve can reuse them wholesale
  TransportPlan plan;
  WeightVectors weights;
  bool have_plan = false;

  std::size_t global_iter = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (!source_only) {
      // full-data refresh: prototypes from scratch, alpha re-assigned
      const ForwardResult src_full = forward(result.params, data.source_inputs);
      result.bank = compute_prototypes(mat_rows(src_full.features),
                                       data.source_labels, L,
                                       config.ema_lambda);
      const ForwardResult tgt_full = forward(result.params, data.target_inputs);
      result.alpha = estimate_alpha(row_max(tgt_full.probabilities),
                                    config.tau1, alpha_floor);
    }

    for (std::size_t it = 0; it < config.iters_per_epoch; ++it, ++global_iter) {
      const std::vector<std::size_t> src_idx = sampler.next_batch();
      const Mat src_inputs = gather_rows(data.source_inputs, src_idx);
      std::vector<int> src_labels(b);
      for (std::size_t i = 0; i < b; ++i)
        src_labels[i] = data.source_labels[src_idx[i]];

      IterationStats stats;
      stats.epoch = epoch;
      stats.iteration = global_iter;

      if (source_only) {
        const Vec unit(L, 1.0);
        const BackwardResult back =
            backward_cross_entropy(result.params, src_inputs, src_labels, unit);
        sgd_step(result.params, back.grads, opt);
        stats.losses = back.losses;
        stats.alpha = result.alpha;
        stats.beta = result.beta;
        result.history.push_back(stats);
        if (log) write_iteration_row(log, stats);
        continue;
      }

      const std::vector<std::size_t> tgt_idx = target_stream.next();
      const Mat tgt_inputs = gather_rows(data.target_inputs, tgt_idx);

      const ForwardResult src_fwd = forward(result.params, src_inputs);
      const ForwardResult tgt_fwd = forward(result.params, tgt_inputs);
      const std::vector<Point> src_feats = mat_rows(src_fwd.features);
      const std::vector<Point> tgt_feats = mat_rows(tgt_fwd.features);

      result.bank = ema_update(result.bank, src_feats, src_labels);

      const double alpha_est =
          estimate_alpha(row_max(tgt_fwd.probabilities), config.tau1, 0.0);
      result.alpha = std::clamp(
          ema_scalar(alpha_est, result.alpha, config.lambda1), alpha_floor, 1.0);

      // transport anchors and their capped masses
      std::vector<Point> anchors;
      Vec anchor_mass;
      if (options.variant == TransportVariant::prototype) {
        anchors = result.bank.prototypes;
        anchor_mass = result.bank.class_mass;
      } else {
        anchors = src_feats;
        anchor_mass.assign(b, 1.0 / static_cast<double>(b));
      }
      const double cap_scale = std::min(1.0, result.alpha / result.beta);
      for (double& m : anchor_mass) m *= cap_scale;

      bool converged = true;
      bool solved = false;
      {
        const DiscreteMeasure mu = weighted_measure(anchors, anchor_mass);
        const DiscreteMeasure nu = uniform_measure(tgt_feats);
        CostMatrix cost = build_cost_matrix(anchors, tgt_feats);
        // normalize to unit max so the regularization strength tracks the
        // feature scale; the plan stays feasible for the unscaled problem
        double max_c = 0.0;
        for (double c : cost.entries.data) max_c = std::max(max_c, c);
        if (max_c > 0.0)
          for (double& c : cost.entries.data) c /= max_c;
        // near-saturated row caps make the marginal projections stall, so on
        // failure retry the same batch with a smoother regularization: a
        // converged blurrier plan still puts its mass on the right samples,
        // unlike a stale plan from an earlier batch
        SolverConfig solver = config.solver;
        for (int attempt = 0; attempt < 4 && !solved; ++attempt) {
          try {
            plan = sinkhorn_pot(mu, nu, cost, result.alpha, solver);
            solved = true;
          } catch (const SolverError&) {
            converged = false;
            solver.epsilon *= 2.0;
          }
        }
      }
      if (!converged) ++result.solver_failures;
      if (solved) {
        weights.target_known = target_weights(plan, result.alpha, b);
        weights.target_unknown =
            unknown_weights(weights.target_known, config.keep_fraction);
        weights.source_class =
            options.variant == TransportVariant::prototype
                ? source_class_weights(plan, result.alpha, L)
                : sample_variant_class_weights(plan, src_labels, result.alpha, L);
        have_plan = true;
      } else {
        if (!have_plan) {
          // first-iteration fallback: uniform plan carrying mass alpha keeps
          // every weight identity exact
          plan.entries = Mat(anchors.size(), b);
          const double fill =
              result.alpha / static_cast<double>(anchors.size() * b);
          for (double& v : plan.entries.data) v = fill;
          plan.total_mass = result.alpha;
          plan.objective = 0.0;
          weights.target_known = target_weights(plan, result.alpha, b);
          weights.target_unknown =
              unknown_weights(weights.target_known, config.keep_fraction);
          weights.source_class =
              options.variant == TransportVariant::prototype
                  ? source_class_weights(plan, result.alpha, L)
                  : sample_variant_class_weights(plan, src_labels, result.alpha,
                                                 L);
          have_plan = true;
        }
        // otherwise the previous plan and weights are reused as-is
      }

      const double beta_est = estimate_beta(weights.source_class, config.tau2, 0.0);
      result.beta = std::clamp(ema_scalar(beta_est, result.beta, config.lambda2),
                               beta_floor, 1.0);

      PrototypeSet ot_bank;
      if (options.variant == TransportVariant::prototype) {
        ot_bank = result.bank;
      } else {
        ot_bank.prototypes = src_feats;
        ot_bank.class_mass.assign(b, 1.0 / static_cast<double>(b));
      }

      const BackwardResult back =
          backward(result.params, src_inputs, src_labels, tgt_inputs, plan,
                   ot_bank, weights, config.loss_weights);
      sgd_step(result.params, back.grads, opt);

      stats.losses = back.losses;
      stats.alpha = result.alpha;
      stats.beta = result.beta;
      stats.sum_target_weights =
          std::accumulate(weights.target_known.begin(),
                          weights.target_known.end(), 0.0);
      stats.sum_class_weights =
          std::accumulate(weights.source_class.begin(),
                          weights.source_class.end(), 0.0);
      stats.unknown_nonzeros = count_nonzero(weights.target_unknown);
      stats.unknown_candidates = 0;
      for (double w : weights.target_known)
        if (w < 1.0) ++stats.unknown_candidates;
      stats.solver_converged = converged;
      result.history.push_back(stats);
      if (log) write_iteration_row(log, stats);
    }
  }

  if (log && !log.good())
    throw std::runtime_error("write to " + options.log_path + " failed");
  return result;
}

NetworkParams initial_network(const ExperimentConfig& config) {
  Rng init_rng(derive_seed(config.seed, 1));
  return init_network(config.scenario.feature_dim, config.hidden_dim,
                      config.bottleneck_dim, config.scenario.num_source_classes(),
                      init_rng);
}

double h_score(double common_accuracy, double private_accuracy) {
  const double denom = common_accuracy + private_accuracy;
  if (denom <= 0.0) return 0.0;
  return 2.0 * common_accuracy * private_accuracy / denom;
}

EvalReport evaluate(const NetworkParams& params, const ScenarioDataset& data,
                    const ExperimentConfig& config, double alpha, double beta) {
  const std::size_t L = config.scenario.num_source_classes();
  const std::size_t n_common = config.scenario.n_common;
  const int unknown = config.scenario.unknown_label();
  EvalReport report;

  const ForwardResult tgt_fwd = forward(params, data.target_inputs);
  const std::size_t n = data.target_inputs.rows;
  std::vector<int> predictions(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    int arg = 0;
    for (std::size_t j = 0; j < L; ++j) {
      if (tgt_fwd.probabilities(i, j) > best) {
        best = tgt_fwd.probabilities(i, j);
        arg = static_cast<int>(j);
      }
    }
    predictions[i] = best < config.xi ? unknown : arg;
  }

  std::vector<std::size_t> correct(n_common + 1, 0), total(n_common + 1, 0);
  std::size_t overall_correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int truth = data.target_known[i]
                          ? data.target_hidden_labels[i]
                          : static_cast<int>(n_common);  // unknown bucket last
    total[truth]++;
    if (predictions[i] == (data.target_known[i] ? data.target_hidden_labels[i]
                                                : unknown)) {
      correct[truth]++;
      overall_correct++;
    }
  }
  report.per_class_accuracy.resize(n_common + 1, 0.0);
  double common_sum = 0.0;
  for (std::size_t c = 0; c <= n_common; ++c) {
    report.per_class_accuracy[c] =
        total[c] ? static_cast<double>(correct[c]) / total[c] : 0.0;
    if (c < n_common) common_sum += report.per_class_accuracy[c];
  }
  report.common_accuracy = common_sum / static_cast<double>(n_common);
  report.private_accuracy = report.per_class_accuracy[n_common];
  report.h_score = h_score(report.common_accuracy, report.private_accuracy);
  report.overall_accuracy = static_cast<double>(overall_correct) / n;

  // full-data weight diagnostics from one exact capped transport
  const ForwardResult src_fwd = forward(params, data.source_inputs);
  const PrototypeSet bank = compute_prototypes(
      mat_rows(src_fwd.features), data.source_labels, L, config.ema_lambda);
  Vec caps = bank.class_mass;
  const double cap_scale = std::min(1.0, alpha / beta);
  for (double& m : caps) m *= cap_scale;
  const std::vector<Point> tgt_feats = mat_rows(tgt_fwd.features);
  const DiscreteMeasure mu = weighted_measure(bank.prototypes, caps);
  const DiscreteMeasure nu = uniform_measure(tgt_feats);
  const CostMatrix cost = build_cost_matrix(bank.prototypes, tgt_feats);
  const TransportPlan plan = solve_exact_pot(mu, nu, cost, alpha);
  const Vec wt = target_weights(plan, alpha, n);
  const Vec ws = source_class_weights(plan, alpha, L);

  double ws_common = 0.0, ws_private = 0.0;
  for (std::size_t j = 0; j < L; ++j)
    (j < n_common ? ws_common : ws_private) += ws[j];
  report.mean_ws_common = ws_common / static_cast<double>(n_common);
  report.mean_ws_private =
      L > n_common ? ws_private / static_cast<double>(L - n_common) : 0.0;

  double wt_known = 0.0, wt_unknown = 0.0;
  std::size_t n_known = 0, n_unknown = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (data.target_known[i]) {
      wt_known += wt[i];
      ++n_known;
    } else {
      wt_unknown += wt[i];
      ++n_unknown;
    }
  }
  report.mean_wt_known = n_known ? wt_known / n_known : 0.0;
  report.mean_wt_unknown = n_unknown ? wt_unknown / n_unknown : 0.0;
  return report;
}

AlignmentReport alignment_diagnostic(const NetworkParams& params,
                                     const ScenarioDataset& data,
                                     std::size_t n_common, double s) {
  AlignmentReport report;
  const ForwardResult src_fwd = forward(params, data.source_inputs);
  const ForwardResult tgt_fwd = forward(params, data.target_inputs);
  const std::vector<Point> src = mat_rows(src_fwd.features);
  const std::vector<Point> tgt = mat_rows(tgt_fwd.features);

  {
    const DiscreteMeasure p = uniform_measure(src);
    const DiscreteMeasure q = uniform_measure(tgt);
    const CostMatrix cost = build_cost_matrix(src, tgt);
    report.pot_full = solve_exact_pot(p, q, cost, s).objective;
  }
  {
    std::vector<Point> src_common, tgt_common;
    for (std::size_t i = 0; i < src.size(); ++i)
      if (data.source_labels[i] < static_cast<int>(n_common))
        src_common.push_back(src[i]);
    for (std::size_t i = 0; i < tgt.size(); ++i)
      if (data.target_known[i]) tgt_common.push_back(tgt[i]);
    const DiscreteMeasure p = uniform_measure(src_common);
    const DiscreteMeasure q = uniform_measure(tgt_common);
    const CostMatrix cost = build_cost_matrix(src_common, tgt_common);
    report.ot_common = solve_exact_ot(p, q, cost).objective;
  }
  return report;
}

BoundCheckSummary run_bound_checks(std::uint64_t seed,
                                   std::size_t n_instances,
                                   const std::string& csv_path) {
  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path);
    if (!csv)
      throw std::runtime_error("cannot open " + csv_path + " for writing");
    csv << std::setprecision(17);
    csv << "instance,sources,targets,classes,batch_size,mass,"
           "batch_bound_lhs,batch_bound_rhs,padded_plan_violation,"
           "pot,distance_term,batch_average,slack,holds\n";
  }

  Rng rng(seed);
  BoundCheckSummary summary;
  summary.instances = n_instances;
  for (std::size_t i = 0; i < n_instances; ++i) {
    const CheckInstance inst = random_check_instance(rng);
    bool holds = false;
    BatchBoundResult prop;
    BoundReport bound;
    try {
      prop = batch_bound_check(inst.bank, inst.target_features, inst.s,
                                inst.partition);
      bound = transport_bound_check(inst.source_features, inst.labels, inst.bank,
                             inst.target_features, inst.s, inst.partition);
      holds = prop.holds && bound.bound_satisfied;
    } catch (const std::exception&) {
      holds = false;
    }
    if (!holds) ++summary.failures;
    if (csv) {
      csv << i << "," << inst.source_features.size() << ","
          << inst.target_features.size() << "," << inst.bank.size() << ","
          << inst.partition.batch_size << "," << inst.s << "," << prop.lhs
          << "," << prop.rhs << "," << prop.padded.worst() << ","
          << bound.pot_value << "," << bound.prototype_distance_term << ","
          << bound.mppot_value << "," << bound.slack << "," << (holds ? 1 : 0)
          << "\n";
    }
  }
  if (csv && !csv.good())
    throw std::runtime_error("write to " + csv_path + " failed");
  return summary;
}

namespace {

bool known_sweep_parameter(const std::string& name) {
  static const char* const names[] = {"eta1",          "eta2",  "eta3",
                                      "tau1",          "tau2",  "xi",
                                      "keep_fraction", "lambda", "batch_size"};
  for (const char* n : names)
    if (name == n) return true;
  return false;
}

}  // namespace

SweepGrid parse_grid(const std::string& spec) {
  SweepGrid grid;
  std::istringstream parts(spec);
  std::string part;
  while (std::getline(parts, part, ';')) {
    if (part.empty()) continue;
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("grid entry '" + part +
                                  "' is not name=v1,v2,...");
    const std::string name = part.substr(0, eq);
    if (!known_sweep_parameter(name))
      throw std::invalid_argument("unknown sweep parameter '" + name + "'");
    std::vector<double> values;
    std::istringstream list(part.substr(eq + 1));
    std::string token;
    while (std::getline(list, token, ',')) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(token, &pos);
      } catch (const std::exception&) {
        throw std::invalid_argument("bad grid value '" + token + "'");
      }
      if (pos != token.size())
        throw std::invalid_argument("bad grid value '" + token + "'");
      values.push_back(v);
    }
    if (values.empty())
      throw std::invalid_argument("grid entry '" + name + "' has no values");
    grid.emplace_back(name, values);
  }
  if (grid.empty()) throw std::invalid_argument("empty sweep grid");
  return grid;
}

namespace {

void apply_override(ExperimentConfig& config, const std::string& name,
                    double value) {
  if (name == "eta1") config.loss_weights.eta1 = value;
  else if (name == "eta2") config.loss_weights.eta2 = value;
  else if (name == "eta3") config.loss_weights.eta3 = value;
  else if (name == "tau1") config.tau1 = value;
  else if (name == "tau2") config.tau2 = value;
  else if (name == "xi") config.xi = value;
  else if (name == "keep_fraction") config.keep_fraction = value;
  else if (name == "lambda") config.lambda1 = config.lambda2 = value;
  else if (name == "batch_size")
    config.batch_size = static_cast<std::size_t>(value);
  else
    throw std::invalid_argument("unknown sweep parameter '" + name + "'");
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                const SweepGrid& grid,
                                TransportVariant variant,
                                const std::string& csv_path) {
  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path);
    if (!csv)
      throw std::runtime_error("cannot open " + csv_path + " for writing");
    csv << std::setprecision(17);
    csv << "settings,seed,config_hash,h_score,common_accuracy,"
           "private_accuracy,final_alpha\n";
  }

  std::vector<SweepRow> rows;
  std::vector<std::size_t> cursor(grid.size(), 0);
  while (true) {
    ExperimentConfig config = base;
    std::ostringstream label;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      apply_override(config, grid[g].first, grid[g].second[cursor[g]]);
      if (g) label << ";";
      label << grid[g].first << "=" << grid[g].second[cursor[g]];
    }
    config.validate();
    config.scenario.seed = config.seed;
    const ScenarioDataset data = generate_scenario(config.scenario);

    TrainOptions options;
    options.variant = variant;
    const TrainResult trained = train(config, data, options);
    const EvalReport report =
        evaluate(trained.params, data, config, trained.alpha, trained.beta);

    SweepRow row;
    row.settings = label.str();
    row.seed = config.seed;
    row.hash = config_hash(config);
    row.h = report.h_score;
    row.common_accuracy = report.common_accuracy;
    row.private_accuracy = report.private_accuracy;
    row.final_alpha = trained.alpha;
    rows.push_back(row);
    if (csv)
      csv << row.settings << "," << row.seed << "," << row.hash << "," << row.h
          << "," << row.common_accuracy << "," << row.private_accuracy << ","
          << row.final_alpha << "\n";

    std::size_t g = 0;
    for (; g < grid.size(); ++g) {
      if (++cursor[g] < grid[g].second.size()) break;
      cursor[g] = 0;
    }
    if (g == grid.size()) break;
  }
  if (csv && !csv.good())
    throw std::runtime_error("write to " + csv_path + " failed");
  return rows;
}

}  // namespace ppot
