#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"

namespace {

void add_run_flags(CLI::App* sub, sqra::cli::Options& opts, std::optional<int>& trials,
                   std::optional<std::uint64_t>& seed, std::optional<int>& workers) {
  sub->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
  sub->add_option("--out-dir", opts.out_dir, "directory for outputs and the run manifest");
  sub->add_option("--trials", trials, "Monte Carlo trials (overrides the config)");
  sub->add_option("--seed", seed, "base seed (overrides the config)");
  sub->add_option("--workers", workers, "worker threads (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic query data sourcing: threshold design and random access simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sqra::cli::kToolVersion);

  sqra::cli::Options opts;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string manifest;
  std::optional<std::string> replay_out;

  auto* analyze = app.add_subcommand("analyze", "closed-form curves over a threshold grid");
  add_run_flags(analyze, opts, trials, seed, workers);
  analyze->add_option("--points", opts.points, "grid size; thresholds k/points");

  auto* optimize = app.add_subcommand("optimize", "threshold maximising expected true positives");
  add_run_flags(optimize, opts, trials, seed, workers);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo metrics at the configured threshold");
  add_run_flags(simulate, opts, trials, seed, workers);
  simulate->add_option("--baseline", opts.baselines, "query_free and/or perfect_matching");
  simulate->add_option("--baseline-grid", opts.baseline_grid, "threshold grid size for perfect_matching");

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo metrics along one axis");
  add_run_flags(sweep, opts, trials, seed, workers);
  sweep->add_option("--axis", opts.axis, "tau, gain, p_pos or query_dim")->required();
  sweep->add_option("--values", opts.values, "comma list or start:stop:count")->required();

  auto* calibrate = app.add_subcommand("calibrate", "empirical matching curves from labelled scores");
  add_run_flags(calibrate, opts, trials, seed, workers);
  calibrate->add_option("--scores", opts.scores_path, "score file: '<score> pos|neg' per line")->required();
  calibrate->add_option("--points", opts.points, "grid size of calibration.csv");

  auto* scores = app.add_subcommand("scores", "sample labelled matching scores from the model");
  add_run_flags(scores, opts, trials, seed, workers);
  scores->add_option("--samples", opts.samples, "scores per label");

  auto* replay = app.add_subcommand("replay", "re-run a recorded manifest");
  replay->add_option("--manifest", manifest, "a *_manifest.json written by an earlier run")->required();
  replay->add_option("--out-dir", replay_out, "write outputs here instead of the recorded directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (replay->parsed()) return sqra::cli::replay_manifest(manifest, replay_out);
    opts.command = app.get_subcommands().front()->get_name();
    opts.trials = trials;
    opts.seed = seed;
    opts.workers = workers;
    const auto config = sqra::cli::read_config_file(opts.config_path);
    return sqra::cli::run_command(opts, config);
  } catch (const sqra::cli::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 2;
  }
}
