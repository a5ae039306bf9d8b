#include "sqra/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sqra/special_functions.hpp"

namespace sqra {

DegreeDistribution::DegreeDistribution(std::map<int, double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("DegreeDistribution: empty distribution");
  double total = 0.0;
  for (const auto& [degree, p] : probs_) {
    if (degree < 1) throw std::invalid_argument("DegreeDistribution: replica counts must be >= 1");
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("DegreeDistribution: probabilities must be nonnegative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("DegreeDistribution: probabilities must sum to 1, got " +
                                std::to_string(total));
  }
  // drop zero-probability entries so max_degree reflects the support
  std::erase_if(probs_, [](const auto& kv) { return kv.second == 0.0; });
  double acc = 0.0;
  for (const auto& [degree, p] : probs_) {
    acc += p;
    cumulative_.emplace_back(acc, degree);
  }
  cumulative_.back().first = 1.0;
}

DegreeDistribution DegreeDistribution::regular(int degree) {
  return DegreeDistribution({{degree, 1.0}});
}

double DegreeDistribution::prob(int degree) const {
  const auto it = probs_.find(degree);
  return it == probs_.end() ? 0.0 : it->second;
}

double DegreeDistribution::mean_degree() const {
  double m = 0.0;
  for (const auto& [degree, p] : probs_) m += degree * p;
  return m;
}

std::optional<int> DegreeDistribution::regular_degree() const {
  if (probs_.size() == 1) return probs_.begin()->first;
  return std::nullopt;
}

int DegreeDistribution::sample(RandomStream& rng) const {
  if (cumulative_.size() == 1) return cumulative_.front().second;
  const double u = rng.uniform();
  for (const auto& [c, degree] : cumulative_) {
    if (u < c) return degree;
  }
  return cumulative_.back().second;
}

IrsaConstants IrsaConstants::regular3() {
  IrsaConstants c;
  c.alpha0 = 0.497867;
  c.alpha1 = 0.784399;
  c.alpha2 = 0.818469;
  c.alpha3 = 0.964528;
  c.nu = {2, 3};
  c.beta0 = {1, 24};
  c.beta1 = {3, 4};
  return c;
}

void IrsaConstants::validate() const {
  if (nu.empty()) throw std::invalid_argument("IrsaConstants: need at least one stopping-set profile");
  if (beta0.size() != nu.size() || beta1.size() != nu.size()) {
    throw std::invalid_argument("IrsaConstants: nu, beta0 and beta1 must have equal length");
  }
  if (!nu_by_degree.empty() && nu_by_degree.size() != nu.size()) {
    throw std::invalid_argument("IrsaConstants: nu_by_degree needs one entry per profile");
  }
  for (std::size_t s = 0; s < nu.size(); ++s) {
    if (nu[s] < 1) throw std::invalid_argument("IrsaConstants: nu entries must be >= 1");
    if (beta1[s] < 0) throw std::invalid_argument("IrsaConstants: beta1 entries must be >= 0");
    if (!nu_by_degree.empty()) {
      int total = 0;
      for (const auto& [degree, count] : nu_by_degree[s]) {
        if (degree < 1 || count < 0) throw std::invalid_argument("IrsaConstants: bad nu_by_degree entry");
        total += count;
      }
      if (total != nu[s]) {
        throw std::invalid_argument("IrsaConstants: nu_by_degree entries must sum to nu");
      }
    }
  }
  for (double a : {alpha0, alpha1, alpha2, alpha3}) {
    if (!std::isfinite(a)) throw std::invalid_argument("IrsaConstants: alphas must be finite");
  }
}

double downlink_outage(double rate_bits_per_symbol, double snr_linear) {
  if (!(snr_linear > 0.0) || std::isnan(snr_linear)) {
    throw std::domain_error("downlink_outage: SNR must be positive");
  }
  if (!(rate_bits_per_symbol >= 0.0) || !std::isfinite(rate_bits_per_symbol)) {
    throw std::domain_error("downlink_outage: rate must be nonnegative and finite");
  }
  if (std::isinf(snr_linear)) return 0.0;
  return -std::expm1(-std::expm1(rate_bits_per_symbol * std::log(2.0)) / snr_linear);
}

FrameResult decode_frame(int slots, const Placements& placements) {
  if (slots < 1) throw std::domain_error("decode_frame: need at least one slot");
  const int n = static_cast<int>(placements.size());
  FrameResult result;
  result.slots_used = slots;
  result.attempted.resize(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) result.attempted[static_cast<std::size_t>(u)] = u;

  // per slot: number of undecoded replicas and the XOR of their owners, so a
  // singleton slot names its user directly
  std::vector<int> count(static_cast<std::size_t>(slots), 0);
  std::vector<int> owner_xor(static_cast<std::size_t>(slots), 0);
  for (int u = 0; u < n; ++u) {
    const auto& mine = placements[static_cast<std::size_t>(u)];
    for (auto it = mine.begin(); it != mine.end(); ++it) {
      const int s = *it;
      if (s < 0 || s >= slots) throw std::out_of_range("decode_frame: slot index out of range");
      if (std::find(mine.begin(), it, s) != it) {
        throw std::invalid_argument("decode_frame: a user's replicas must occupy distinct slots");
      }
      ++count[static_cast<std::size_t>(s)];
      owner_xor[static_cast<std::size_t>(s)] ^= u;
    }
  }

  std::vector<char> decoded(static_cast<std::size_t>(n), 0);
  std::vector<int> frontier;
  for (int s = 0; s < slots; ++s) {
    if (count[static_cast<std::size_t>(s)] == 1) frontier.push_back(s);
  }
  std::vector<int> next;
  while (!frontier.empty()) {
    bool progress = false;
    next.clear();
    for (int s : frontier) {
      if (count[static_cast<std::size_t>(s)] != 1) continue;
      const int u = owner_xor[static_cast<std::size_t>(s)];
      if (decoded[static_cast<std::size_t>(u)]) continue;
      decoded[static_cast<std::size_t>(u)] = 1;
      progress = true;
      for (int t : placements[static_cast<std::size_t>(u)]) {
        auto& c = count[static_cast<std::size_t>(t)];
        --c;
        owner_xor[static_cast<std::size_t>(t)] ^= u;
        if (c == 1) next.push_back(t);
      }
    }
    if (progress) ++result.iterations;
    frontier.swap(next);
  }
  for (int u = 0; u < n; ++u) {
    if (decoded[static_cast<std::size_t>(u)]) result.decoded.push_back(u);
  }
  return result;
}

Placements sample_placements(int num_transmitters, int slots, const DegreeDistribution& degrees,
                             RandomStream& rng) {
  if (slots < 1) throw std::domain_error("simulate_frame: need at least one slot");
  if (num_transmitters < 0) throw std::domain_error("simulate_frame: negative transmitter count");
  if (degrees.max_degree() > slots) {
    throw std::invalid_argument("simulate_frame: max degree " + std::to_string(degrees.max_degree()) +
                                " exceeds " + std::to_string(slots) + " slots");
  }
  Placements placements(static_cast<std::size_t>(num_transmitters));
  for (auto& chosen : placements) {
    const int degree = degrees.sample(rng);
    chosen.reserve(static_cast<std::size_t>(degree));
    // Floyd's algorithm: `degree` distinct slots, uniform over all subsets
    for (int j = slots - degree; j < slots; ++j) {
      const int t = rng.uniform_int(j + 1);
      if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
        chosen.push_back(t);
      } else {
        chosen.push_back(j);
      }
    }
  }
  return placements;
}

FrameResult simulate_frame(int num_transmitters, int slots, const DegreeDistribution& degrees,
                           RandomStream& rng) {
  return decode_frame(slots, sample_placements(num_transmitters, slots, degrees, rng));
}

double aloha_error_prob(double arrival_rate, int slots) {
  if (!(arrival_rate >= 0.0)) throw std::domain_error("aloha_error_prob: negative arrival rate");
  if (slots < 1) throw std::domain_error("aloha_error_prob: need at least one slot");
  return -std::expm1(-arrival_rate / slots);
}

namespace {

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// φ(s) = Σ_{k<ν} (-1)^{ν-1+k} λ^k (ν-1)!/k!
double stopping_set_poly(int nu, double lambda) {
  double sum = 0.0;
  double coeff = std::tgamma(static_cast<double>(nu));  // (ν-1)!/k! at k = 0
  double power = 1.0;
  for (int k = 0; k < nu; ++k) {
    const double sign = ((nu - 1 + k) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * coeff * power;
    power *= lambda;
    coeff /= (k + 1);
  }
  return sum;
}

}  // namespace

double irsa_error_floor(double arrival_rate, int slots, const DegreeDistribution& degrees,
                        const IrsaConstants& constants) {
  if (!(arrival_rate >= 0.0)) throw std::domain_error("irsa_error_floor: negative arrival rate");
  if (slots < 1) throw std::domain_error("irsa_error_floor: need at least one slot");
  constants.validate();
  const auto regular = degrees.regular_degree();
  if (constants.nu_by_degree.empty() && !regular) {
    throw std::invalid_argument(
        "irsa_error_floor: nu_by_degree is required for non-regular degree distributions");
  }
  double total = 0.0;
  for (int s = 0; s < constants.num_profiles(); ++s) {
    const auto idx = static_cast<std::size_t>(s);
    if (constants.beta1[idx] > slots) {
      throw std::invalid_argument("irsa_error_floor: beta1 = " + std::to_string(constants.beta1[idx]) +
                                  " exceeds the number of slots");
    }
    const std::map<int, int> profile = constants.nu_by_degree.empty()
                                           ? std::map<int, int>{{*regular, constants.nu[idx]}}
                                           : constants.nu_by_degree[idx];
    double log_mag = std::log(static_cast<double>(constants.nu[idx])) +
                     std::log(static_cast<double>(constants.beta0[idx])) +
                     log_binomial(slots, constants.beta1[idx]);
    bool vanishes = constants.beta0[idx] == 0;
    for (const auto& [degree, count] : profile) {
      if (count == 0) continue;
      const double p = degrees.prob(degree);
      if (degree > slots || p == 0.0) {
        vanishes = true;
        break;
      }
      log_mag += count * std::log(p) - std::lgamma(count + 1.0) - count * log_binomial(slots, degree);
    }
    if (vanishes) continue;
    total += stopping_set_poly(constants.nu[idx], arrival_rate) * std::exp(log_mag);
  }
  return total;
}

double irsa_waterfall(double arrival_rate, int slots, const IrsaConstants& constants) {
  if (!(arrival_rate >= 0.0)) throw std::domain_error("irsa_waterfall: negative arrival rate");
  if (slots < 1) throw std::domain_error("irsa_waterfall: need at least one slot");
  const double load = arrival_rate / slots;
  const double shift = constants.alpha2 - constants.alpha3 * std::pow(slots, -2.0 / 3.0) - load;
  const double arg = std::sqrt(static_cast<double>(slots)) * shift /
                     std::sqrt(constants.alpha0 * constants.alpha0 + load);
  return constants.alpha1 * gaussian_q(arg);
}

double irsa_error_prob_approx(double arrival_rate, int slots, const DegreeDistribution& degrees,
                              const IrsaConstants& constants) {
  const double floor = std::max(0.0, irsa_error_floor(arrival_rate, slots, degrees, constants));
  return std::min(1.0, floor + irsa_waterfall(arrival_rate, slots, constants));
}

double ChannelParams::uplink_error(double arrival_rate) const {
  if (is_aloha()) return aloha_error_prob(arrival_rate, slots);
  if (!irsa) throw std::invalid_argument("ChannelParams: IRSA constants required for this degree distribution");
  if (arrival_rate >= slots) return 1.0;
  return irsa_error_prob_approx(arrival_rate, slots, degrees, *irsa);
}

void ChannelParams::validate() const {
  if (!(p_err_dl >= 0.0 && p_err_dl <= 1.0)) {
    throw std::invalid_argument("ChannelParams: p_err_dl must lie in [0, 1]");
  }
  if (slots < 1) throw std::invalid_argument("ChannelParams: slots must be >= 1");
  if (degrees.max_degree() > slots) {
    throw std::invalid_argument("ChannelParams: max degree exceeds the number of slots");
  }
  if (!is_aloha()) {
    if (!irsa) throw std::invalid_argument("ChannelParams: IRSA constants required for this degree distribution");
    irsa->validate();
    if (irsa->nu_by_degree.empty() && !degrees.regular_degree()) {
      throw std::invalid_argument("ChannelParams: nu_by_degree required for irregular degrees");
    }
    for (int b : irsa->beta1) {
      if (b > slots) throw std::invalid_argument("ChannelParams: IRSA beta1 exceeds the number of slots");
    }
  }
}

}  // namespace sqra
