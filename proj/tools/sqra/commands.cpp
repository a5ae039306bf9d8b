#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sqra/experiment.hpp"
#include "sqra/matching.hpp"

namespace sqra::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double x) {
  std::ostringstream out;
  out << std::setprecision(12) << x;
  return out.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
    written_.push_back(name);
  }

  const std::vector<std::string>& written() const { return written_; }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

void write_manifest(OutputDir& out, const Options& opts, const ConfigSource& config,
                    const ExperimentConfig& cfg, const json& results) {
  json m;
  m["tool"] = "sqra";
  m["version"] = kToolVersion;
  m["command"] = opts.command;
  m["args"] = opts.to_json();
  m["config_source"] = config.name;
  m["config_hash"] = hex64(config_hash(config.json));
  m["config"] = config.json;
  m["seed"] = cfg.seed;
  m["timestamp"] = utc_timestamp();
  m["outputs"] = out.written();
  m["results"] = results;
  std::ofstream file(out.path() / (opts.command + "_manifest.json"), std::ios::binary);
  if (!file) throw std::runtime_error("cannot write manifest into '" + out.path().string() + "'");
  file << m.dump(2) << '\n';
}

json solution_json(const ThresholdSolution& s) {
  return {{"tau", s.tau},
          {"expected_tp", s.expected_tp},
          {"lambda_tp", s.lambda_tp},
          {"lambda_fa", s.lambda_fa},
          {"p_err_ul", s.p_err_ul},
          {"solver", to_string(s.solver)},
          {"iterations", s.iterations},
          {"residual", s.residual},
          {"boundary", s.boundary},
          {"tau_lb", s.tau_lb}};
}

std::string solution_text(const ThresholdSolution& s, int slots) {
  std::ostringstream out;
  out << "tau: " << num(s.tau) << '\n'
      << "expected_tp: " << num(s.expected_tp) << '\n'
      << "lambda_tp: " << num(s.lambda_tp) << '\n'
      << "lambda_fa: " << num(s.lambda_fa) << '\n'
      << "frame_load: " << num((s.lambda_tp + s.lambda_fa) / slots) << '\n'
      << "p_err_ul: " << num(s.p_err_ul) << '\n'
      << "solver: " << to_string(s.solver) << '\n'
      << "iterations: " << s.iterations << '\n'
      << "residual: " << num(s.residual) << '\n'
      << "boundary: " << (s.boundary ? "true" : "false") << '\n'
      << "tau_lb: " << num(s.tau_lb) << '\n';
  return out.str();
}

ExperimentConfig effective_config(const Options& opts, const ConfigSource& config) {
  ExperimentConfig cfg = to_experiment_config(config);
  if (opts.trials) cfg.trials = *opts.trials;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.workers) cfg.workers = *opts.workers;
  if (cfg.trials < 1) throw ValidationError("--trials must be >= 1");
  if (cfg.workers < 1) throw ValidationError("--workers must be >= 1");
  return cfg;
}

std::vector<double> tau_grid(int points) {
  if (points < 1) throw ValidationError("--points must be >= 1");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int k = 1; k <= points; ++k) grid[static_cast<std::size_t>(k - 1)] = static_cast<double>(k) / points;
  return grid;
}

void metrics_row(std::ostream& out, const std::string& scheme, double parameter, const MetricsReport& r) {
  out << scheme << ',' << num(parameter) << ',' << num(r.accuracy.mean) << ',' << num(r.accuracy.half_width)
      << ',' << num(r.eps_md.mean) << ',' << num(r.eps_md.half_width) << ',' << num(r.eps_fa.mean) << ','
      << num(r.eps_fa.half_width) << ',' << num(r.eps_fa_device.mean) << ','
      << num(r.eps_fa_device.half_width) << ',' << num(r.mean_ntp.mean) << ','
      << num(r.mean_ntp.half_width) << ',' << r.trials << '\n';
}

int cmd_analyze(const Options& opts, const ConfigSource& config) {
  const ExperimentConfig cfg = effective_config(opts, config);
  const Experiment exp(cfg);
  std::ostringstream csv;
  csv << "tau,md_match,fa_match,lambda_tp,lambda_fa,p_err_ul,expected_tp,eps_md,eps_fa\n";
  for (double tau : tau_grid(opts.points)) {
    const TxRates rates = tx_rates(tau, exp.closed_form(), exp.population());
    const MdFa e2e = end_to_end_md_fa(tau, exp.closed_form(), exp.population(), exp.channel());
    csv << num(tau) << ',' << num(exp.closed_form().md_match(tau)) << ',' << num(exp.closed_form().fa_match(tau))
        << ',' << num(rates.lambda_tp) << ',' << num(rates.lambda_fa) << ','
        << num(exp.channel().uplink_error(rates.total())) << ','
        << num(expected_tp(tau, exp.closed_form(), exp.population(), exp.channel())) << ','
        << num(e2e.eps_md) << ',' << num(e2e.eps_fa) << '\n';
  }
  OutputDir out(opts.out_dir);
  out.write("analysis.csv", csv.str());
  write_manifest(out, opts, config, cfg, json::object());
  return 0;
}

int cmd_optimize(const Options& opts, const ConfigSource& config) {
  const ExperimentConfig cfg = effective_config(opts, config);
  const Experiment exp(cfg);
  const ThresholdSolution sol = exp.optimize();
  const std::string text = solution_text(sol, cfg.slots);
  std::cout << text;
  OutputDir out(opts.out_dir);
  out.write("solution.txt", text);
  write_manifest(out, opts, config, cfg, {{"solution", solution_json(sol)}});
  return 0;
}

int cmd_simulate(const Options& opts, const ConfigSource& config) {
  const ExperimentConfig cfg = effective_config(opts, config);
  const Experiment exp(cfg);
  json results = json::object();
  double tau = 0.0;
  if (cfg.tau) {
    tau = *cfg.tau;
  } else {
    const ThresholdSolution sol = exp.optimize();
    tau = sol.tau;
    results["solution"] = solution_json(sol);
  }
  results["tau_used"] = tau;

  std::ostringstream csv;
  csv << "scheme,parameter,accuracy,acc_ci,eps_md,md_ci,eps_fa,fa_ci,eps_fa_device,fa_device_ci,mean_ntp,"
         "ntp_ci,trials\n";
  metrics_row(csv, "semantic", tau, exp.estimate(TransmitPolicy::semantic(tau), cfg.trials, true, cfg.workers));
  for (const auto& name : opts.baselines) {
    if (name == "query_free") {
      const BaselineResult b = baseline_query_free(exp, cfg.trials, cfg.workers);
      metrics_row(csv, name, b.parameter, b.report);
      results["query_free_activation"] = b.parameter;
    } else if (name == "perfect_matching") {
      const BaselineResult b =
          baseline_perfect_matching(exp, cfg.trials, tau_grid(opts.baseline_grid), BaselineCriterion::min_md,
                                    cfg.workers);
      metrics_row(csv, name, b.parameter, b.report);
      results["perfect_matching_tau"] = b.parameter;
    } else {
      throw ValidationError("unknown baseline '" + name + "' (expected query_free or perfect_matching)");
    }
  }
  OutputDir out(opts.out_dir);
  out.write("metrics.csv", csv.str());
  write_manifest(out, opts, config, cfg, results);
  return 0;
}

int cmd_sweep(const Options& opts, const ConfigSource& config) {
  const ExperimentConfig cfg = effective_config(opts, config);
  if (opts.axis.empty()) throw ValidationError("sweep needs --axis");
  SweepAxis axis;
  try {
    axis = parse_sweep_axis(opts.axis);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  const std::vector<double> values = parse_values(opts.values);
  SweepResult result;
  try {
    result = sweep(cfg, axis, values, cfg.trials, cfg.workers);
  } catch (const std::domain_error& e) {
    throw ValidationError(e.what());
  }
  OutputDir out(opts.out_dir);
  std::ostringstream csv;
  write_sweep_csv(csv, result);
  out.write(std::string("sweep_") + to_string(axis) + ".csv", csv.str());
  json results = json::object();
  if (result.optimum) {
    const ThresholdSolution& s = *result.optimum;
    const Experiment exp(cfg);
    const MdFa e2e = end_to_end_md_fa(s.tau, exp.closed_form(), exp.population(), exp.channel());
    std::ostringstream opt;
    opt << "tau_star,expected_tp,analytic_md,analytic_fa,solver\n"
        << num(s.tau) << ',' << num(s.expected_tp) << ',' << num(e2e.eps_md) << ',' << num(e2e.eps_fa) << ','
        << to_string(s.solver) << '\n';
    out.write("sweep_tau_optimum.csv", opt.str());
    results["solution"] = solution_json(s);
  }
  write_manifest(out, opts, config, cfg, results);
  return 0;
}

int cmd_calibrate(const Options& opts, const ConfigSource& config) {
  const ExperimentConfig cfg = effective_config(opts, config);
  if (opts.scores_path.empty()) throw ValidationError("calibrate needs --scores");
  std::ifstream in(opts.scores_path);
  if (!in) throw ValidationError("cannot open score file '" + opts.scores_path + "'");
  ScoreSamples samples;
  try {
    samples = read_score_file(in);
  } catch (const std::runtime_error& e) {
    throw ValidationError(opts.scores_path + ": " + e.what());
  }
  std::unique_ptr<EmpiricalCurves> curves;
  try {
    curves = std::make_unique<EmpiricalCurves>(
        calibrate_empirical(std::move(samples.positive), std::move(samples.negative), cfg.p_err_dl));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(opts.scores_path + ": " + e.what());
  }
  const Experiment exp(cfg);
  std::ostringstream csv;
  csv << "tau,md_conditional,fa_conditional,md_match,fa_match,closed_md_match,closed_fa_match\n";
  for (double tau : tau_grid(opts.points)) {
    csv << num(tau) << ',' << num(curves->md_conditional(tau)) << ',' << num(curves->fa_conditional(tau)) << ','
        << num(curves->md_match(tau)) << ',' << num(curves->fa_match(tau)) << ','
        << num(exp.closed_form().md_match(tau)) << ',' << num(exp.closed_form().fa_match(tau)) << '\n';
  }
  const ThresholdSolution empirical =
      solve_threshold_grid(*curves, exp.population(), exp.channel(), tau_grid(10'000));
  const ThresholdSolution closed = exp.optimize();
  const std::string text = solution_text(empirical, cfg.slots) + "closed_form_tau: " + num(closed.tau) + '\n';
  std::cout << text;
  OutputDir out(opts.out_dir);
  out.write("calibration.csv", csv.str());
  out.write("calibration_solution.txt", text);
  write_manifest(out, opts, config, cfg,
                 {{"empirical_solution", solution_json(empirical)}, {"closed_form_solution", solution_json(closed)},
                  {"positives", curves->positive().size()}, {"negatives", curves->negative().size()}});
  return 0;
}

int cmd_scores(const Options& opts, const ConfigSource& config) {
  const ExperimentConfig cfg = effective_config(opts, config);
  if (opts.samples < 1) throw ValidationError("--samples must be >= 1");
  const Experiment exp(cfg);
  const ScoreSamples s = sample_match_scores(exp, opts.samples, opts.samples, cfg.seed);
  std::ostringstream text;
  text << "# score label\n" << std::setprecision(17);
  for (double v : s.positive) text << v << " pos\n";
  for (double v : s.negative) text << v << " neg\n";
  OutputDir out(opts.out_dir);
  out.write("scores.txt", text.str());
  write_manifest(out, opts, config, cfg, json::object());
  return 0;
}

}  // namespace

json Options::to_json() const {
  json j;
  j["command"] = command;
  j["config"] = config_path;
  j["out_dir"] = out_dir;
  if (trials) j["trials"] = *trials;
  if (seed) j["seed"] = *seed;
  if (workers) j["workers"] = *workers;
  if (!axis.empty()) j["axis"] = axis;
  if (!values.empty()) j["values"] = values;
  if (!baselines.empty()) j["baselines"] = baselines;
  j["baseline_grid"] = baseline_grid;
  if (!scores_path.empty()) j["scores"] = scores_path;
  j["points"] = points;
  j["samples"] = samples;
  return j;
}

Options Options::from_json(const json& args) {
  Options o;
  o.command = args.value("command", "");
  o.config_path = args.value("config", "");
  o.out_dir = args.value("out_dir", ".");
  if (args.contains("trials")) o.trials = args.at("trials").get<int>();
  if (args.contains("seed")) o.seed = args.at("seed").get<std::uint64_t>();
  if (args.contains("workers")) o.workers = args.at("workers").get<int>();
  o.axis = args.value("axis", "");
  o.values = args.value("values", "");
  if (args.contains("baselines")) o.baselines = args.at("baselines").get<std::vector<std::string>>();
  o.baseline_grid = args.value("baseline_grid", 50);
  o.scores_path = args.value("scores", "");
  o.points = args.value("points", 1000);
  o.samples = args.value("samples", 100'000LL);
  return o;
}

std::vector<double> parse_values(const std::string& text) {
  if (text.empty()) throw ValidationError("--values is empty");
  std::vector<double> out;
  auto to_double = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ValidationError("--values: cannot parse '" + s + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ValidationError("--values: range form is start:stop:count");
    const double count = to_double(parts[2]);
    if (count < 1 || count != static_cast<int>(count)) throw ValidationError("--values: count must be a positive integer");
    return linspace(to_double(parts[0]), to_double(parts[1]), static_cast<int>(count));
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(to_double(p));
  return out;
}

int run_command(const Options& opts, const ConfigSource& config) {
  if (opts.command == "analyze") return cmd_analyze(opts, config);
  if (opts.command == "optimize") return cmd_optimize(opts, config);
  if (opts.command == "simulate") return cmd_simulate(opts, config);
  if (opts.command == "sweep") return cmd_sweep(opts, config);
  if (opts.command == "calibrate") return cmd_calibrate(opts, config);
  if (opts.command == "scores") return cmd_scores(opts, config);
  throw ValidationError("unknown command '" + opts.command + "'");
}

int replay_manifest(const std::string& manifest_path, const std::optional<std::string>& out_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open manifest '" + manifest_path + "'");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(manifest_path + ": invalid JSON: " + e.what());
  }
  if (!manifest.contains("args") || !manifest.contains("config")) {
    throw ValidationError(manifest_path + ": not a run manifest (needs args and config)");
  }
  Options opts = Options::from_json(manifest.at("args"));
  if (out_dir) opts.out_dir = *out_dir;
  ConfigSource config;
  config.name = manifest.value("config_source", manifest_path);
  config.json = manifest.at("config");
  config.text = config.json.dump(2);
  return run_command(opts, config);
}

}  // namespace sqra::cli
