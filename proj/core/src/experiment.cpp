#include "sqra/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "sqra/special_functions.hpp"

namespace sqra {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

GmmModel make_model(const ExperimentConfig& config) {
  Matrix centroids = build_centroids(config.num_classes, config.feature_dim);
  const double variance = calibrate_covariance(centroids, config.target_gain);
  return GmmModel::isotropic(std::move(centroids), variance);
}

// Welford accumulator; NaN samples are skipped.
class RunningMean {
 public:
  void add(double x) {
    if (std::isnan(x)) return;
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  Estimate finish() const {
    Estimate e;
    e.count = n_;
    if (n_ == 0) {
      e.mean = kNaN;
      e.half_width = kNaN;
      return e;
    }
    e.mean = mean_;
    e.half_width = n_ > 1 ? 1.96 * std::sqrt(m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_)) : 0.0;
    return e;
  }

 private:
  long long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct TrialSummary {
  double accuracy = kNaN;
  double md = kNaN;
  double fa = kNaN;
  double fa_device = kNaN;
  double ntp = 0.0;
};

TrialSummary summarize(const TrialOutcome& t, int num_devices) {
  TrialSummary s;
  if (t.inference_run) s.accuracy = t.correct() ? 1.0 : 0.0;
  if (t.num_relevant > 0) {
    s.md = static_cast<double>(t.num_relevant - t.relevant_received) / t.num_relevant;
  }
  if (t.num_received() > 0) s.fa = static_cast<double>(t.irrelevant_received) / t.num_received();
  const int num_irrelevant = num_devices - t.num_relevant;
  if (num_irrelevant > 0) s.fa_device = static_cast<double>(t.irrelevant_received) / num_irrelevant;
  s.ntp = t.relevant_received;
  return s;
}

double golden_maximize(const std::function<double(double)>& f, double a, double b, double& best_x) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > 1e-12 * std::max(1.0, std::abs(b))) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  best_x = fc >= fd ? c : d;
  return std::max(fc, fd);
}

}  // namespace

ChannelParams ExperimentConfig::channel() const {
  ChannelParams ch;
  ch.p_err_dl = p_err_dl;
  ch.slots = slots;
  ch.degrees = degrees;
  ch.irsa = irsa;
  if (!degrees.is_aloha() && !ch.irsa && degrees.regular_degree() == 3) {
    ch.irsa = IrsaConstants::regular3();
  }
  return ch;
}

void ExperimentConfig::validate() const {
  require(num_classes >= 2, "num_classes", "must be >= 2");
  require(feature_dim >= 1, "feature_dim", "must be >= 1");
  require(target_gain > 0.0 && std::isfinite(target_gain), "target_gain", "must be positive and finite");
  require(num_devices >= 1, "num_devices", "must be >= 1");
  require(p_pos >= 0.0 && p_pos <= 1.0, "p_pos", "must lie in [0, 1]");
  require(query_dim >= 1 && query_dim <= feature_dim, "query_dim", "must satisfy 1 <= l <= feature_dim");
  require(p_err_dl >= 0.0 && p_err_dl <= 1.0, "p_err_dl", "must lie in [0, 1]");
  require(slots >= 1, "slots", "must be >= 1");
  require(degrees.max_degree() <= slots, "degrees", "max degree exceeds the number of slots");
  if (tau) require(*tau > 0.0 && *tau <= 1.0, "tau", "must lie in (0, 1] or be \"auto\"");
  require(trials >= 1, "trials", "must be >= 1");
  require(workers >= 1, "workers", "must be >= 1");
  try {
    channel().validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("irsa: ") + e.what());
  }
}

Experiment::Experiment(ExperimentConfig config)
    : config_((config.validate(), std::move(config))),
      model_(make_model(config_)),
      projection_(optimal_projection(model_, config_.query_dim)),
      closed_form_(MatchParams::from_projection(projection_, config_.p_err_dl, config_.p_pos,
                                                config_.num_devices)),
      channel_(config_.channel()) {
  whitened_centroids_ = model_.inv_sqrt_cov().asDiagonal() * model_.centroids().transpose();
  projected_centroids_ = projection_.rows() * whitened_centroids_;
}

ThresholdSolution Experiment::optimize() const { return solve_threshold(closed_form_, channel_); }

double Experiment::resolve_tau() const { return config_.tau ? *config_.tau : optimize().tau; }

TrialOutcome Experiment::run_trial(const TransmitPolicy& policy, RandomStream& rng,
                                   bool inference) const {
  const int num_devices = config_.num_devices;
  const int num_classes = config_.num_classes;
  const int l = config_.query_dim;
  const int d = config_.feature_dim;

  TrialOutcome out;
  out.query_class = rng.uniform_int(num_classes);
  std::vector<ClassId> classes(static_cast<std::size_t>(num_devices));
  for (auto& z : classes) z = sample_device_class(out.query_class, num_classes, config_.p_pos, rng);
  std::vector<char> outage(static_cast<std::size_t>(num_devices));
  for (auto& o : outage) o = rng.bernoulli(config_.p_err_dl) ? 1 : 0;
  for (ClassId z : classes) out.num_relevant += (z == out.query_class);

  // Projected noise of the query and of each device key; drawn only when the
  // transmit rule needs it, otherwise at inference time.
  Vector w_query;
  Matrix w_keys;
  auto draw = [&rng](Eigen::Ref<Vector> v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  };

  switch (policy.kind) {
    case TransmitPolicy::Kind::semantic: {
      if (!(policy.tau > 0.0 && policy.tau <= 1.0)) throw std::domain_error("run_trial: tau must lie in (0, 1]");
      w_query.resize(l);
      draw(w_query);
      w_keys.resize(l, num_devices);
      const Vector q = projected_centroids_.col(out.query_class) + w_query;
      for (int m = 0; m < num_devices; ++m) {
        if (outage[static_cast<std::size_t>(m)]) continue;
        draw(w_keys.col(m));
        const double dist2 =
            (projected_centroids_.col(classes[static_cast<std::size_t>(m)]) + w_keys.col(m) - q).squaredNorm();
        // ||sqrt(d/l) (k - q)||^2 / d
        if (std::exp(-dist2 / l) >= policy.tau) out.matched.push_back(m);
      }
      break;
    }
    case TransmitPolicy::Kind::query_free: {
      for (int m = 0; m < num_devices; ++m) {
        if (outage[static_cast<std::size_t>(m)]) continue;
        if (rng.bernoulli(policy.activation)) out.matched.push_back(m);
      }
      break;
    }
    case TransmitPolicy::Kind::perfect_matching: {
      if (!(policy.tau > 0.0 && policy.tau <= 1.0)) throw std::domain_error("run_trial: tau must lie in (0, 1]");
      const double t = -l * std::log(policy.tau);
      const double p_match = 1.0 - reg_gamma_upper(0.5 * l, 0.25 * t);
      for (int m = 0; m < num_devices; ++m) {
        if (outage[static_cast<std::size_t>(m)]) continue;
        if (classes[static_cast<std::size_t>(m)] != out.query_class) continue;
        if (rng.bernoulli(p_match)) out.matched.push_back(m);
      }
      break;
    }
  }
  out.transmitted = out.matched;

  const FrameResult frame = simulate_frame(static_cast<int>(out.transmitted.size()), config_.slots,
                                           config_.degrees, rng);
  out.sic_iterations = frame.iterations;
  out.decoded.reserve(frame.decoded.size());
  for (int u : frame.decoded) {
    const int m = out.transmitted[static_cast<std::size_t>(u)];
    out.decoded.push_back(m);
    if (classes[static_cast<std::size_t>(m)] == out.query_class) {
      ++out.relevant_received;
    } else {
      ++out.irrelevant_received;
    }
  }
  std::sort(out.decoded.begin(), out.decoded.end());

  if (!inference) return out;
  out.inference_run = true;
  if (out.decoded.empty()) return out;

  // Whitened full feature mu~_z + n with P n = w: n = P^T w + (I - P^T P) n'.
  const Matrix& p = projection_.rows();
  Vector scratch(d);
  auto full_feature = [&](ClassId z, const Vector& w) {
    draw(scratch);
    Vector y = whitened_centroids_.col(z) + scratch;
    y.noalias() += p.transpose() * (w - p * scratch);
    return y;
  };
  if (w_query.size() == 0) {
    w_query.resize(l);
    draw(w_query);
  }
  const Vector y_query = full_feature(out.query_class, w_query);

  const auto n_rx = static_cast<Eigen::Index>(out.decoded.size());
  Matrix features(d, n_rx);
  std::vector<double> log_weights(static_cast<std::size_t>(n_rx));
  Vector w(l);
  for (Eigen::Index i = 0; i < n_rx; ++i) {
    const int m = out.decoded[static_cast<std::size_t>(i)];
    if (w_keys.size() != 0) {
      w = w_keys.col(m);
    } else {
      draw(w);
    }
    const Vector y = full_feature(classes[static_cast<std::size_t>(m)], w);
    log_weights[static_cast<std::size_t>(i)] =
        config_.fusion == FusionWeight::relevancy ? -(y - y_query).squaredNorm() / d
                                                  : -(p * (y - y_query)).squaredNorm() / l;
    features.col(i) = y.cwiseProduct(model_.sqrt_cov());
  }
  // the fusion rule is scale invariant; normalise so the largest weight is 1
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> weights(log_weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = std::max(std::exp(log_weights[i] - top), std::numeric_limits<double>::min());
  }
  out.predicted = map_classify(fuse_features(features, weights), weights, model_);
  return out;
}

MetricsReport Experiment::estimate(const TransmitPolicy& policy, int trials, bool inference,
                                   int workers) const {
  if (trials < 1) throw std::invalid_argument("estimate: trials must be >= 1");
  workers = std::clamp(workers, 1, trials);
  std::vector<TrialSummary> summaries(static_cast<std::size_t>(trials));

  auto run_range = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      RandomStream rng = RandomStream::substream(config_.seed, static_cast<std::uint64_t>(i));
      summaries[static_cast<std::size_t>(i)] =
          summarize(run_trial(policy, rng, inference), config_.num_devices);
    }
  };

  if (workers == 1) {
    run_range(0, trials);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int k = 0; k < workers; ++k) {
      const int begin = static_cast<int>(static_cast<long long>(trials) * k / workers);
      const int end = static_cast<int>(static_cast<long long>(trials) * (k + 1) / workers);
      pool.emplace_back([&, k, begin, end] {
        try {
          run_range(begin, end);
        } catch (...) {
          errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  RunningMean acc, md, fa, fa_dev, ntp;
  for (const auto& s : summaries) {
    acc.add(s.accuracy);
    md.add(s.md);
    fa.add(s.fa);
    fa_dev.add(s.fa_device);
    ntp.add(s.ntp);
  }
  MetricsReport report;
  report.accuracy = acc.finish();
  report.eps_md = md.finish();
  report.eps_fa = fa.finish();
  report.eps_fa_device = fa_dev.finish();
  report.mean_ntp = ntp.finish();
  report.trials = trials;
  return report;
}

MetricsReport estimate_metrics(const Experiment& experiment, double tau, int trials, int workers) {
  return experiment.estimate(TransmitPolicy::semantic(tau), trials, true, workers);
}

ScoreSamples sample_match_scores(const Experiment& experiment, long long positives,
                                 long long negatives, std::uint64_t seed) {
  if (positives < 0 || negatives < 0) throw std::invalid_argument("sample_match_scores: negative count");
  const auto& cfg = experiment.config();
  const Matrix pc = experiment.projection().rows() *
                     (experiment.model().inv_sqrt_cov().asDiagonal() * experiment.model().centroids().transpose());
  const int l = cfg.query_dim;
  const int z_count = cfg.num_classes;
  ScoreSamples out;
  out.positive.reserve(static_cast<std::size_t>(positives));
  out.negative.reserve(static_cast<std::size_t>(negatives));
  RandomStream rng(seed);
  Vector diff(l);
  auto score = [&](ClassId zm, ClassId zq) {
    // k - q = P(mu~_m - mu~_q) + w_m - w_q, scaled by sqrt(d/l)
    for (int i = 0; i < l; ++i) diff[i] = pc(i, zm) - pc(i, zq) + rng.normal() - rng.normal();
    return std::exp(-diff.squaredNorm() / l);
  };
  for (long long i = 0; i < positives; ++i) {
    const ClassId z = rng.uniform_int(z_count);
    out.positive.push_back(score(z, z));
  }
  for (long long i = 0; i < negatives; ++i) {
    const ClassId zq = rng.uniform_int(z_count);
    const ClassId other = rng.uniform_int(z_count - 1);
    out.negative.push_back(score(other >= zq ? other + 1 : other, zq));
  }
  return out;
}

double query_free_activation(const ChannelParams& channel, int num_devices) {
  if (num_devices < 1) throw std::invalid_argument("query_free_activation: need at least one device");
  const double m = num_devices;
  const double slots = channel.slots;
  if (channel.is_aloha()) {
    // d/dp [p (1 - p/L)^{M-1}] = 0 at p = L/M
    return std::min(1.0, slots / m);
  }
  const double p_max = std::min(1.0, slots / m);
  auto success = [&](double p) {
    const double lambda = m * p;
    if (lambda >= slots) return 0.0;
    return p * (1.0 - channel.uplink_error(lambda));
  };
  const std::vector<double> grid = linspace(0.0, p_max, 2001);
  std::size_t best = 0;
  double best_value = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = success(grid[i]);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  const double a = grid[best == 0 ? 0 : best - 1];
  const double b = grid[std::min(best + 1, grid.size() - 1)];
  double x = grid[best];
  if (b > a && golden_maximize(success, a, b, x) < best_value) x = grid[best];
  return x;
}

BaselineResult baseline_query_free(const Experiment& experiment, int trials, int workers) {
  BaselineResult result;
  result.parameter = query_free_activation(experiment.channel(), experiment.config().num_devices);
  result.report = experiment.estimate(TransmitPolicy::query_free(result.parameter), trials, true, workers);
  return result;
}

BaselineResult baseline_perfect_matching(const Experiment& experiment, int trials,
                                         const std::vector<double>& tau_grid,
                                         BaselineCriterion criterion, int workers) {
  if (tau_grid.empty()) throw std::invalid_argument("baseline_perfect_matching: empty threshold grid");
  const bool need_accuracy = criterion == BaselineCriterion::max_accuracy;
  double best_tau = tau_grid.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (double tau : tau_grid) {
    const MetricsReport r =
        experiment.estimate(TransmitPolicy::perfect_matching(tau), trials, need_accuracy, workers);
    const double score = need_accuracy ? r.accuracy.mean : -r.eps_md.mean;
    if (score > best_score) {
      best_score = score;
      best_tau = tau;
    }
  }
  BaselineResult result;
  result.parameter = best_tau;
  result.report = experiment.estimate(TransmitPolicy::perfect_matching(best_tau), trials, true, workers);
  return result;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "tau") return SweepAxis::tau;
  if (name == "gain") return SweepAxis::gain;
  if (name == "p_pos") return SweepAxis::p_pos;
  if (name == "query_dim") return SweepAxis::query_dim;
  throw std::invalid_argument("unknown sweep axis '" + name + "' (expected tau, gain, p_pos or query_dim)");
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::tau: return "tau";
    case SweepAxis::gain: return "gain";
    case SweepAxis::p_pos: return "p_pos";
    case SweepAxis::query_dim: return "query_dim";
  }
  return "unknown";
}

SweepResult sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values,
                  int trials, int workers) {
  if (values.empty()) throw std::invalid_argument("sweep: no axis values");
  for (double v : values) {
    switch (axis) {
      case SweepAxis::tau:
        if (!(v > 0.0 && v <= 1.0)) throw std::domain_error("sweep: tau values must lie in (0, 1]");
        break;
      case SweepAxis::gain:
        if (!(v > 0.0) || !std::isfinite(v)) throw std::domain_error("sweep: gain values must be positive");
        break;
      case SweepAxis::p_pos:
        if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("sweep: p_pos values must lie in [0, 1]");
        break;
      case SweepAxis::query_dim:
        if (v != std::floor(v) || v < 1 || v > config.feature_dim) {
          throw std::domain_error("sweep: query_dim values must be integers in [1, feature_dim]");
        }
        break;
    }
  }

  SweepResult result;
  result.axis = axis;
  std::optional<Experiment> shared;
  if (axis == SweepAxis::tau) {
    shared.emplace(config);
    result.optimum = shared->optimize();
  }
  for (double v : values) {
    std::optional<Experiment> local;
    const Experiment* exp = nullptr;
    double tau = v;
    if (axis == SweepAxis::tau) {
      exp = &*shared;
    } else {
      ExperimentConfig c = config;
      if (axis == SweepAxis::gain) c.target_gain = v;
      if (axis == SweepAxis::p_pos) c.p_pos = v;
      if (axis == SweepAxis::query_dim) c.query_dim = static_cast<int>(v);
      local.emplace(std::move(c));
      exp = &*local;
      tau = exp->resolve_tau();
    }
    SweepRow row;
    row.axis_value = v;
    row.tau_used = tau;
    row.report = exp->estimate(TransmitPolicy::semantic(tau), trials, true, workers);
    const MdFa analytic = end_to_end_md_fa(tau, exp->closed_form(), exp->population(), exp->channel());
    row.analytic_md = analytic.eps_md;
    row.analytic_fa = analytic.eps_fa;
    row.analytic_entp = expected_tp(tau, exp->closed_form(), exp->population(), exp->channel());
    result.rows.push_back(row);
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  const auto old_precision = out.precision(10);
  out << "axis_value,tau_used,accuracy,acc_ci,eps_md,md_ci,eps_fa,fa_ci,mean_ntp,analytic_md,"
         "analytic_fa,analytic_entp,eps_fa_device,fa_device_ci\n";
  for (const auto& r : result.rows) {
    out << r.axis_value << ',' << r.tau_used << ',' << r.report.accuracy.mean << ','
        << r.report.accuracy.half_width << ',' << r.report.eps_md.mean << ',' << r.report.eps_md.half_width
        << ',' << r.report.eps_fa.mean << ',' << r.report.eps_fa.half_width << ','
        << r.report.mean_ntp.mean << ',' << r.analytic_md << ',' << r.analytic_fa << ','
        << r.analytic_entp << ',' << r.report.eps_fa_device.mean << ','
        << r.report.eps_fa_device.half_width << '\n';
  }
  out.precision(old_precision);
}

}  // namespace sqra
