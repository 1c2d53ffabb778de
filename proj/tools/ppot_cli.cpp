// Command-line front end: training runs, checkpoint evaluation, transport
// bound verification, hyper-parameter sweeps, and dataset export, all
// reproducible from a config file plus a seed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "ppot/config.hpp"
#include "ppot/net.hpp"
#include "ppot/scenario.hpp"
#include "ppot/trainer.hpp"

namespace {

using namespace ppot;

ExperimentConfig resolve_config(const std::string& config_path,
                                bool seed_given, std::uint64_t seed) {
  ExperimentConfig config =
      config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  if (seed_given) config.seed = seed;
  config.scenario.seed = config.seed;
  config.validate();
  return config;
}

std::string out_file(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

TransportVariant parse_variant(const std::string& name) {
  return name == "sample-pot" ? TransportVariant::sample
                              : TransportVariant::prototype;
}

void write_eval_csv(const std::string& path, const EvalReport& report,
                    double alpha, double beta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << std::setprecision(17);
  out << "metric,value\n";
  out << "h_score," << report.h_score << "\n";
  out << "common_accuracy," << report.common_accuracy << "\n";
  out << "private_accuracy," << report.private_accuracy << "\n";
  out << "overall_accuracy," << report.overall_accuracy << "\n";
  out << "alpha," << alpha << "\n";
  out << "beta," << beta << "\n";
  out << "mean_ws_common," << report.mean_ws_common << "\n";
  out << "mean_ws_private," << report.mean_ws_private << "\n";
  out << "mean_wt_known," << report.mean_wt_known << "\n";
  out << "mean_wt_unknown," << report.mean_wt_unknown << "\n";
  for (std::size_t c = 0; c < report.per_class_accuracy.size(); ++c)
    out << "class_" << c << "_accuracy," << report.per_class_accuracy[c]
        << "\n";
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

void print_eval(const EvalReport& report, double alpha, double beta) {
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "h_score            " << report.h_score << "\n";
  std::cout << "common_accuracy    " << report.common_accuracy << "\n";
  std::cout << "private_accuracy   " << report.private_accuracy << "\n";
  std::cout << "overall_accuracy   " << report.overall_accuracy << "\n";
  std::cout << "alpha              " << alpha << "\n";
  std::cout << "beta               " << beta << "\n";
  std::cout << "mean w^s common    " << report.mean_ws_common << "\n";
  std::cout << "mean w^s private   " << report.mean_ws_private << "\n";
  std::cout << "mean w^t known     " << report.mean_wt_known << "\n";
  std::cout << "mean w^t unknown   " << report.mean_wt_unknown << "\n";
}

int cmd_train(const ExperimentConfig& config, const std::string& out_dir,
              const std::string& variant_name, bool skip_alignment) {
  const ScenarioDataset data = generate_scenario(config.scenario);
  TrainOptions options;
  options.variant = parse_variant(variant_name);
  options.log_path = out_file(out_dir, "train_log.csv");

  AlignmentReport pre;
  if (!skip_alignment)
    pre = alignment_diagnostic(initial_network(config), data,
                               config.scenario.n_common, data.true_alpha);

  const TrainResult result = train(config, data, options);
  save_network(result.params, out_file(out_dir, "checkpoint.txt"));
  save_config(config, out_file(out_dir, "config.txt"));

  const EvalReport report =
      evaluate(result.params, data, config, result.alpha, result.beta);
  write_eval_csv(out_file(out_dir, "evaluation.csv"), report, result.alpha,
                 result.beta);

  std::cout << "trained " << config.epochs << " epochs x "
            << config.iters_per_epoch << " iterations (variant "
            << variant_name << ", seed " << config.seed << ", config hash "
            << std::hex << config_hash(config) << std::dec << ")\n";
  if (result.solver_failures > 0)
    std::cout << "solver failures    " << result.solver_failures
              << " (retried with smoother regularization)\n";
  print_eval(report, result.alpha, result.beta);
  std::cout << "true alpha         " << data.true_alpha << "\n";
  std::cout << "true beta          " << data.true_beta << "\n";

  if (!skip_alignment) {
    const AlignmentReport post =
        alignment_diagnostic(result.params, data, config.scenario.n_common,
                             data.true_alpha);
    std::ofstream out(out_file(out_dir, "alignment.csv"));
    out << std::setprecision(17);
    out << "phase,pot_full,ot_common\n";
    out << "pre," << pre.pot_full << "," << pre.ot_common << "\n";
    out << "post," << post.pot_full << "," << post.ot_common << "\n";
    std::cout << "alignment pre      pot " << pre.pot_full << "  ot_common "
              << pre.ot_common << "\n";
    std::cout << "alignment post     pot " << post.pot_full << "  ot_common "
              << post.ot_common << "\n";
  }
  std::cout << "outputs in " << out_dir << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& config, const std::string& out_dir,
                 const std::string& checkpoint, double alpha, double beta) {
  const ScenarioDataset data = generate_scenario(config.scenario);
  const NetworkParams params = load_network(checkpoint);
  const EvalReport report = evaluate(params, data, config, alpha, beta);
  write_eval_csv(out_file(out_dir, "evaluation.csv"), report, alpha, beta);
  print_eval(report, alpha, beta);
  return 0;
}

int cmd_check_bounds(std::uint64_t seed, std::size_t instances,
                       const std::string& out_dir) {
  const BoundCheckSummary summary = run_bound_checks(
      seed, instances, out_file(out_dir, "bound_checks.csv"));
  std::cout << "checked " << summary.instances << " random instances, "
            << summary.failures << " failures\n";
  return summary.failures == 0 ? 0 : 1;
}

int cmd_sweep(const ExperimentConfig& base, const std::string& out_dir,
              const std::string& grid_spec, const std::string& variant_name) {
  const SweepGrid grid = parse_grid(grid_spec);
  const std::vector<SweepRow> rows =
      run_sweep(base, grid, parse_variant(variant_name),
                out_file(out_dir, "sweep.csv"));
  std::cout << std::fixed << std::setprecision(4);
  for (const SweepRow& row : rows)
    std::cout << row.settings << "  h=" << row.h
              << "  common=" << row.common_accuracy
              << "  private=" << row.private_accuracy
              << "  alpha=" << row.final_alpha << "\n";
  std::cout << rows.size() << " grid points -> " << out_dir << "/sweep.csv\n";
  return 0;
}

int cmd_gen_data(const ExperimentConfig& config, const std::string& out_dir) {
  const ScenarioDataset data = generate_scenario(config.scenario);
  export_scenario_csv(data, out_file(out_dir, "dataset.csv"));
  std::cout << "source samples     " << data.source_inputs.rows << "\n";
  std::cout << "target samples     " << data.target_inputs.rows << "\n";
  std::cout << "true alpha         " << data.true_alpha << "\n";
  std::cout << "true beta          " << data.true_beta << "\n";
  std::cout << "wrote " << out_dir << "/dataset.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partial-transport domain adaptation experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", variant = "ppot";
  std::uint64_t seed = 0;
  std::string checkpoint, grid_spec;
  double alpha = 1.0, beta = 1.0;
  std::size_t instances = 200;
  bool skip_alignment = false;

  auto add_common = [&](CLI::App* cmd, bool with_variant) {
    cmd->add_option("--config", config_path, "experiment config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out_dir, "output directory (default: out)");
    if (with_variant)
      cmd->add_option("--variant", variant,
                      "transport anchors: ppot (prototypes) or sample-pot")
          ->check(CLI::IsMember({"ppot", "sample-pot"}));
  };

  CLI::App* train_cmd = app.add_subcommand(
      "train", "train on the configured scenario; writes checkpoint, "
               "iteration log, evaluation, and alignment diagnostics");
  add_common(train_cmd, true);
  train_cmd->add_flag("--skip-alignment", skip_alignment,
                      "skip the exact pre/post transport diagnostics");

  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "evaluate a saved checkpoint on the configured scenario");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "network checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--alpha", alpha,
                       "mass estimate for the weight diagnostics");
  eval_cmd->add_option("--beta", beta,
                       "class-overlap estimate for the weight diagnostics");

  CLI::App* check_cmd = app.add_subcommand(
      "check-bounds",
      "verify the transport bounds on random instances with exact solvers");
  check_cmd->add_option("--seed", seed, "instance generator seed");
  check_cmd->add_option("--instances", instances, "number of random instances");
  check_cmd->add_option("--out", out_dir, "output directory (default: out)");

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "train/evaluate over a hyper-parameter grid");
  add_common(sweep_cmd, true);
  sweep_cmd
      ->add_option("--grid", grid_spec,
                   "grid, e.g. \"xi=0.5,0.75;eta1=1,5\" over eta1|eta2|eta3|"
                   "tau1|tau2|xi|keep_fraction|lambda|batch_size")
      ->required();

  CLI::App* gen_cmd = app.add_subcommand(
      "gen-data", "write the configured scenario as a CSV dataset");
  add_common(gen_cmd, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(check_cmd))
      return cmd_check_bounds(seed, instances, out_dir);

    CLI::App* active = app.get_subcommands().front();
    const bool seed_given = active->count("--seed") > 0;
    const ExperimentConfig config =
        resolve_config(config_path, seed_given, seed);
    if (app.got_subcommand(train_cmd))
      return cmd_train(config, out_dir, variant, skip_alignment);
    if (app.got_subcommand(eval_cmd))
      return cmd_evaluate(config, out_dir, checkpoint, alpha, beta);
    if (app.got_subcommand(sweep_cmd))
      return cmd_sweep(config, out_dir, grid_spec, variant);
    if (app.got_subcommand(gen_cmd)) return cmd_gen_data(config, out_dir);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
