#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sqra/random.hpp"

namespace sqra {

/// Replica-count distribution {Λ_ℓ} of an IRSA user; Λ(x) = x is slotted ALOHA.
class DegreeDistribution {
 public:
  /// Probabilities must be nonnegative, keyed by ℓ >= 1, and sum to 1 within 1e-12.
  explicit DegreeDistribution(std::map<int, double> probs);

  static DegreeDistribution aloha() { return regular(1); }
  static DegreeDistribution regular(int degree);

  const std::map<int, double>& probs() const { return probs_; }
  double prob(int degree) const;
  int max_degree() const { return probs_.rbegin()->first; }
  double mean_degree() const;
  bool is_aloha() const { return probs_.size() == 1 && probs_.begin()->first == 1; }
  /// Degree k if Λ(x) = x^k, otherwise nullopt.
  std::optional<int> regular_degree() const;

  int sample(RandomStream& rng) const;

 private:
  std::map<int, double> probs_;
  std::vector<std::pair<double, int>> cumulative_;
};

/// Waterfall and error-floor constants of the IRSA error approximation.
///
/// Stopping-set profile s (s = 0..A-1) has total size nu[s], multiplicity
/// beta0[s] and beta1[s] involved slots. `nu_by_degree[s]` splits nu[s] over
/// replica counts; it may be left empty for a regular Λ(x) = x^k, in which
/// case the whole profile sits on degree k.
struct IrsaConstants {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double alpha3 = 0.0;
  std::vector<int> nu;
  std::vector<int> beta0;
  std::vector<int> beta1;
  std::vector<std::map<int, int>> nu_by_degree;

  /// Published constants for Λ(x) = x^3.
  static IrsaConstants regular3();

  int num_profiles() const { return static_cast<int>(nu.size()); }
  /// Throws std::invalid_argument when the vectors are inconsistent.
  void validate() const;
};

struct FrameResult {
  std::vector<int> attempted;  // transmitter ids 0..n-1
  std::vector<int> decoded;    // sorted, subset of attempted
  int slots_used = 0;
  int iterations = 0;          // SIC rounds that decoded at least one user
};

/// Slot indices of each user's replicas, one inner vector per user.
using Placements = std::vector<std::vector<int>>;

/// p_err^dl = 1 - exp(-(2^R - 1) / γ) for Rayleigh block fading.
double downlink_outage(double rate_bits_per_symbol, double snr_linear);

/// Iterative singleton peeling of one frame with known replica locations.
/// A user's slots must be distinct and lie in [0, slots).
FrameResult decode_frame(int slots, const Placements& placements);

/// Draw degrees and distinct slots for `num_transmitters` users, then decode.
FrameResult simulate_frame(int num_transmitters, int slots, const DegreeDistribution& degrees,
                           RandomStream& rng);

/// Sample the replica placements simulate_frame would decode.
Placements sample_placements(int num_transmitters, int slots, const DegreeDistribution& degrees,
                             RandomStream& rng);

/// Collision probability of a tagged ALOHA packet under Poisson(λ) load.
double aloha_error_prob(double arrival_rate, int slots);

/// Error-floor term, unclamped (it is negative at very small loads).
double irsa_error_floor(double arrival_rate, int slots, const DegreeDistribution& degrees,
                        const IrsaConstants& constants);

/// Waterfall term α1 Q(√L (α2 - α3 L^{-2/3} - λ/L) / √(α0² + λ/L)).
double irsa_waterfall(double arrival_rate, int slots, const IrsaConstants& constants);

/// min(1, max(0, error floor) + waterfall).
double irsa_error_prob_approx(double arrival_rate, int slots, const DegreeDistribution& degrees,
                              const IrsaConstants& constants);

/// Uplink description shared by the analysis and the simulator.
struct ChannelParams {
  double p_err_dl = 0.0;
  int slots = 1;
  DegreeDistribution degrees = DegreeDistribution::aloha();
  std::optional<IrsaConstants> irsa;  // required unless degrees is ALOHA

  bool is_aloha() const { return degrees.is_aloha(); }
  /// Analytical uplink error at offered load λ (ALOHA closed form or IRSA
  /// approximation; 1 for IRSA at λ >= L).
  double uplink_error(double arrival_rate) const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

}  // namespace sqra
