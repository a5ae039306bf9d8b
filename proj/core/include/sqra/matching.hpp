#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "sqra/channel.hpp"
#include "sqra/gmm.hpp"
#include "sqra/query.hpp"

namespace sqra {

/// Smallest threshold the solvers consider; matching at or below it accepts
/// essentially every device.
inline constexpr double kTauMin = 1e-6;

/// Inputs of the closed-form matching statistics.
struct MatchParams {
  int query_dim = 1;
  int num_classes = 2;
  Matrix gains;          // symmetric |Z| x |Z| pairwise gains under the projection
  double p_err_dl = 0.0;
  double p_pos = 0.0;
  int num_devices = 0;

  static MatchParams from_projection(const Projection& projection, double p_err_dl, double p_pos,
                                     int num_devices);
  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// Devices in the cell and the chance each observes the query class.
struct Population {
  int num_devices = 0;
  double p_pos = 0.0;
};

/// Marginal matching-stage error probabilities, downlink outage included.
class MatchStatistics {
 public:
  virtual ~MatchStatistics() = default;
  /// Pr(a query-class device does not transmit).
  virtual double md_match(double tau) const = 0;
  /// Pr(a device of another class transmits).
  virtual double fa_match(double tau) const = 0;
};

/// Closed forms for the Gaussian mixture. Equal gains are grouped so each
/// distinct value is evaluated once.
class ClosedFormMatch final : public MatchStatistics {
 public:
  explicit ClosedFormMatch(MatchParams params);

  double md_match(double tau) const override;
  double fa_match(double tau) const override;

  const MatchParams& params() const { return params_; }
  Population population() const { return {params_.num_devices, params_.p_pos}; }
  /// Distinct pairwise gains (i < j) with their multiplicities.
  const std::vector<std::pair<double, int>>& gain_groups() const { return groups_; }

 private:
  MatchParams params_;
  std::vector<std::pair<double, int>> groups_;
};

/// Step-function matching statistics estimated from scored samples.
class EmpiricalCurves final : public MatchStatistics {
 public:
  /// Scores must lie in [0, 1]; both lists must be nonempty.
  EmpiricalCurves(std::vector<double> positive_scores, std::vector<double> negative_scores,
                  double p_err_dl);

  /// Fraction of positive scores strictly below tau.
  double md_conditional(double tau) const;
  /// Fraction of negative scores at or above tau.
  double fa_conditional(double tau) const;

  double md_match(double tau) const override;
  double fa_match(double tau) const override;

  const std::vector<double>& positive() const { return positive_; }
  const std::vector<double>& negative() const { return negative_; }
  double p_err_dl() const { return p_err_dl_; }

 private:
  std::vector<double> positive_;
  std::vector<double> negative_;
  double p_err_dl_;
};

/// Labelled scores from a two-column text file: "<score> pos|neg" per line.
/// Blank lines and lines starting with '#' are skipped.
struct ScoreSamples {
  std::vector<double> positive;
  std::vector<double> negative;
};
ScoreSamples read_score_file(std::istream& in);

/// Empirical matching curves with downlink outage folded into the marginals.
EmpiricalCurves calibrate_empirical(std::vector<double> positive_scores,
                                    std::vector<double> negative_scores, double p_err_dl);

double md_match_prob(double tau, const MatchParams& params);
double fa_match_prob(double tau, const MatchParams& params);

struct TxRates {
  double lambda_tp = 0.0;
  double lambda_fa = 0.0;
  double total() const { return lambda_tp + lambda_fa; }
};
TxRates tx_rates(double tau, const MatchStatistics& stats, const Population& population);

/// λ_TP (1 - p_ul(λ)); zero for IRSA at or beyond λ = L.
double expected_tp(double tau, const MatchStatistics& stats, const Population& population,
                   const ChannelParams& channel);

/// Analytical end-to-end (ε_MD, ε_FA).
struct MdFa {
  double eps_md = 0.0;
  double eps_fa = 0.0;
};
MdFa end_to_end_md_fa(double tau, const MatchStatistics& stats, const Population& population,
                      const ChannelParams& channel);

/// Optimality residual for the ALOHA objective. Strictly increasing in tau
/// when some gain is positive, equal to L at tau = 1 and divergent to -inf as
/// tau -> 0; its root maximises expected_tp.
double psi(double tau, const MatchParams& params, int slots);

enum class ThresholdSolver { aloha_root, irsa_multistart, grid };
const char* to_string(ThresholdSolver solver);

struct ThresholdSolution {
  double tau = 1.0;
  double expected_tp = 0.0;
  double lambda_tp = 0.0;
  double lambda_fa = 0.0;
  double p_err_ul = 0.0;
  ThresholdSolver solver = ThresholdSolver::grid;
  int iterations = 0;
  double residual = 0.0;  // ψ at the returned tau for aloha_root
  bool boundary = false;  // ψ >= 0 on the whole bracket; tau is the lower end
  double tau_lb = kTauMin;  // smallest feasible tau (irsa_multistart)
};

/// Bisection on ψ over [lower, upper] until |ψ| <= 1e-9 L or the bracket
/// collapses to machine precision.
ThresholdSolution solve_threshold_aloha(const MatchParams& params, int slots,
                                        double lower = kTauMin, double upper = 1.0);

/// inf{tau : λ(tau) <= L} by bisection on the decreasing total rate.
double feasible_tau_lower_bound(const MatchStatistics& stats, const Population& population,
                                int slots);

/// Multistart golden-section maximisation of expected_tp over [tau_lb, 1]:
/// `starts` equally spaced seeds, each searched on the bracket spanned by its
/// neighbours. Works for ALOHA as well as IRSA channels.
ThresholdSolution solve_threshold_irsa(const MatchStatistics& stats, const Population& population,
                                       const ChannelParams& channel, int starts = 10);

/// Maximise expected_tp over an explicit set of candidate thresholds (first
/// maximiser wins on ties).
ThresholdSolution solve_threshold_grid(const MatchStatistics& stats, const Population& population,
                                       const ChannelParams& channel,
                                       const std::vector<double>& candidates);

/// Closed-form ALOHA root or IRSA multistart, whichever fits the channel.
ThresholdSolution solve_threshold(const ClosedFormMatch& stats, const ChannelParams& channel);

/// `count` equally spaced points on [lower, upper], endpoints included.
std::vector<double> linspace(double lower, double upper, int count);

}  // namespace sqra
