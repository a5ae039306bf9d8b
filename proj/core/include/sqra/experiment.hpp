#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sqra/channel.hpp"
#include "sqra/gmm.hpp"
#include "sqra/matching.hpp"
#include "sqra/query.hpp"

namespace sqra {

/// Fusion weight of a received observation at the server.
enum class FusionWeight {
  relevancy,       // exp(-Mahalanobis distance / d) on the full features
  matching_score,  // the device's own matching score
};

struct ExperimentConfig {
  int num_classes = 21;
  int feature_dim = 75;
  double target_gain = 40.0;  // average pairwise discriminant gain, sets Σ = C I
  int num_devices = 200;
  double p_pos = 0.1;
  int query_dim = 20;
  double p_err_dl = 0.1;
  int slots = 10;
  DegreeDistribution degrees = DegreeDistribution::aloha();
  std::optional<IrsaConstants> irsa;
  std::optional<double> tau;  // empty: use the optimised threshold
  int trials = 10'000;
  std::uint64_t seed = 1;
  int workers = 1;
  FusionWeight fusion = FusionWeight::relevancy;

  ChannelParams channel() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Which devices transmit in a trial.
struct TransmitPolicy {
  enum class Kind {
    semantic,          // matching score >= tau
    query_free,        // each device with probability `activation`
    perfect_matching,  // query-class devices only, each with the closed-form TP-match probability
  };
  Kind kind = Kind::semantic;
  double tau = 1.0;
  double activation = 0.0;

  static TransmitPolicy semantic(double tau) { return {Kind::semantic, tau, 0.0}; }
  static TransmitPolicy query_free(double p) { return {Kind::query_free, 1.0, p}; }
  static TransmitPolicy perfect_matching(double tau) { return {Kind::perfect_matching, tau, 0.0}; }
};

struct TrialOutcome {
  ClassId query_class = 0;
  std::vector<int> matched;      // device ids passing the transmit rule
  std::vector<int> transmitted;  // device ids that sent replicas
  std::vector<int> decoded;      // device ids recovered by SIC
  int num_relevant = 0;          // devices observing the query class
  int relevant_received = 0;     // true positives received
  int irrelevant_received = 0;
  std::optional<ClassId> predicted;  // none when nothing was received or inference was off
  bool inference_run = false;
  int sic_iterations = 0;

  int num_received() const { return static_cast<int>(decoded.size()); }
  bool correct() const { return predicted && *predicted == query_class; }
};

/// Mean with a 95% normal-approximation half-width over `count` samples.
struct Estimate {
  double mean = 0.0;
  double half_width = 0.0;
  long long count = 0;
};

struct MetricsReport {
  Estimate accuracy;       // empty when inference was skipped
  Estimate eps_md;         // per-trial missed fraction of query-class devices
  Estimate eps_fa;         // per-trial fraction of received observations from other classes
  Estimate eps_fa_device;  // per-trial fraction of other-class devices that were received
  Estimate mean_ntp;       // true positives received per trial
  long long trials = 0;
};

/// A configured world: model, projection, matching statistics and channel.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const GmmModel& model() const { return model_; }
  const Projection& projection() const { return projection_; }
  const ClosedFormMatch& closed_form() const { return closed_form_; }
  const ChannelParams& channel() const { return channel_; }
  Population population() const { return {config_.num_devices, config_.p_pos}; }

  /// Threshold maximising the analytical expected true positives.
  ThresholdSolution optimize() const;
  /// The configured threshold, or the optimised one when the config says auto.
  double resolve_tau() const;

  /// One protocol frame. Inference draws come last, so switching inference
  /// off leaves every retrieval outcome unchanged.
  TrialOutcome run_trial(const TransmitPolicy& policy, RandomStream& rng, bool inference = true) const;

  /// Trials 0..trials-1 on substreams of the configured seed. Results do not
  /// depend on the number of workers.
  MetricsReport estimate(const TransmitPolicy& policy, int trials, bool inference = true,
                         int workers = 1) const;

 private:
  ExperimentConfig config_;
  GmmModel model_;
  Projection projection_;
  ClosedFormMatch closed_form_;
  ChannelParams channel_;
  Matrix whitened_centroids_;   // d x |Z|
  Matrix projected_centroids_;  // l x |Z|
};

MetricsReport estimate_metrics(const Experiment& experiment, double tau, int trials, int workers = 1);

/// Matching scores of independent (device, query) pairs that received the
/// query: positives share the query class, negatives do not.
ScoreSamples sample_match_scores(const Experiment& experiment, long long positives,
                                 long long negatives, std::uint64_t seed);

/// Activation probability maximising a device's chance of a successful
/// transmission: argmax p (1 - p/L)^{M-1} for ALOHA, argmax p (1 - p_ul(M p))
/// over M p < L for IRSA.
double query_free_activation(const ChannelParams& channel, int num_devices);

struct BaselineResult {
  double parameter = 0.0;  // activation probability or threshold
  MetricsReport report;
};

BaselineResult baseline_query_free(const Experiment& experiment, int trials, int workers = 1);

enum class BaselineCriterion { min_md, max_accuracy };

/// Grid search over thresholds for the oracle matcher, then a final run at
/// the chosen threshold.
BaselineResult baseline_perfect_matching(const Experiment& experiment, int trials,
                                         const std::vector<double>& tau_grid,
                                         BaselineCriterion criterion = BaselineCriterion::min_md,
                                         int workers = 1);

enum class SweepAxis { tau, gain, p_pos, query_dim };
SweepAxis parse_sweep_axis(const std::string& name);
const char* to_string(SweepAxis axis);

struct SweepRow {
  double axis_value = 0.0;
  double tau_used = 0.0;
  MetricsReport report;
  double analytic_md = 0.0;
  double analytic_fa = 0.0;
  double analytic_entp = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::tau;
  std::vector<SweepRow> rows;
  std::optional<ThresholdSolution> optimum;  // tau axis: the solver's threshold
};

/// One report per axis value. Every point reuses the configured seed.
SweepResult sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values,
                  int trials, int workers = 1);

void write_sweep_csv(std::ostream& out, const SweepResult& result);

}  // namespace sqra
