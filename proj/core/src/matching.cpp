#include "sqra/matching.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sqra/special_functions.hpp"

namespace sqra {
namespace {

void check_tau(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::domain_error("matching threshold must lie in (0, 1], got " + std::to_string(tau));
  }
}

double scaled_threshold(double tau, int query_dim) { return -query_dim * std::log(tau); }

double md_closed_form(double tau, int query_dim, double p_err_dl) {
  check_tau(tau);
  const double t = scaled_threshold(tau, query_dim);
  return 1.0 - (1.0 - p_err_dl) * (1.0 - reg_gamma_upper(0.5 * query_dim, 0.25 * t));
}

double fa_closed_form(double tau, int query_dim, int num_classes, double p_err_dl,
                      const std::vector<std::pair<double, int>>& groups) {
  check_tau(tau);
  const double t = scaled_threshold(tau, query_dim);
  const double b = std::sqrt(0.5 * t);
  double sum = 0.0;
  for (const auto& [g, count] : groups) sum += count * marcum_q(0.5 * query_dim, std::sqrt(0.5 * g), b);
  const double pairs = 0.5 * num_classes * (num_classes - 1.0);
  return (1.0 - p_err_dl) * std::clamp(1.0 - sum / pairs, 0.0, 1.0);
}

std::vector<std::pair<double, int>> group_gains(const Matrix& gains) {
  std::vector<double> values;
  for (Eigen::Index i = 0; i < gains.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < gains.cols(); ++j) values.push_back(std::max(0.0, gains(i, j)));
  }
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, int>> groups;
  for (double v : values) {
    // projected gains that agree to rounding are treated as one value
    if (!groups.empty() && v - groups.back().first <= 1e-10 * std::max(1.0, v)) {
      ++groups.back().second;
    } else {
      groups.emplace_back(v, 1);
    }
  }
  return groups;
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

MatchParams MatchParams::from_projection(const Projection& projection, double p_err_dl,
                                         double p_pos, int num_devices) {
  MatchParams params;
  params.query_dim = projection.query_dim();
  params.num_classes = static_cast<int>(projection.gains().rows());
  params.gains = projection.gains();
  params.p_err_dl = p_err_dl;
  params.p_pos = p_pos;
  params.num_devices = num_devices;
  params.validate();
  return params;
}

void MatchParams::validate() const {
  if (query_dim < 1) throw std::invalid_argument("MatchParams: query_dim must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("MatchParams: need at least two classes");
  if (gains.rows() != num_classes || gains.cols() != num_classes) {
    throw std::invalid_argument("MatchParams: gains must be |Z| x |Z|");
  }
  if (!gains.allFinite() || (gains - gains.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + gains.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("MatchParams: gains must be finite and symmetric");
  }
  if (gains.minCoeff() < -1e-12) throw std::invalid_argument("MatchParams: gains must be nonnegative");
  if (!is_probability(p_err_dl)) throw std::invalid_argument("MatchParams: p_err_dl must lie in [0, 1]");
  if (!is_probability(p_pos)) throw std::invalid_argument("MatchParams: p_pos must lie in [0, 1]");
  if (num_devices < 0) throw std::invalid_argument("MatchParams: num_devices must be >= 0");
}

ClosedFormMatch::ClosedFormMatch(MatchParams params) : params_(std::move(params)) {
  params_.validate();
  groups_ = group_gains(params_.gains);
}

double ClosedFormMatch::md_match(double tau) const {
  return md_closed_form(tau, params_.query_dim, params_.p_err_dl);
}

double ClosedFormMatch::fa_match(double tau) const {
  return fa_closed_form(tau, params_.query_dim, params_.num_classes, params_.p_err_dl, groups_);
}

double md_match_prob(double tau, const MatchParams& params) {
  return md_closed_form(tau, params.query_dim, params.p_err_dl);
}

double fa_match_prob(double tau, const MatchParams& params) {
  return fa_closed_form(tau, params.query_dim, params.num_classes, params.p_err_dl,
                        group_gains(params.gains));
}

EmpiricalCurves::EmpiricalCurves(std::vector<double> positive_scores,
                                 std::vector<double> negative_scores, double p_err_dl)
    : positive_(std::move(positive_scores)), negative_(std::move(negative_scores)), p_err_dl_(p_err_dl) {
  if (positive_.empty() || negative_.empty()) {
    throw std::invalid_argument("EmpiricalCurves: positive and negative score lists must be nonempty");
  }
  if (!is_probability(p_err_dl_)) throw std::invalid_argument("EmpiricalCurves: p_err_dl must lie in [0, 1]");
  for (const auto* list : {&positive_, &negative_}) {
    for (double s : *list) {
      if (!is_probability(s)) throw std::invalid_argument("EmpiricalCurves: scores must lie in [0, 1]");
    }
  }
  std::sort(positive_.begin(), positive_.end());
  std::sort(negative_.begin(), negative_.end());
}

double EmpiricalCurves::md_conditional(double tau) const {
  const auto below = std::lower_bound(positive_.begin(), positive_.end(), tau) - positive_.begin();
  return static_cast<double>(below) / static_cast<double>(positive_.size());
}

double EmpiricalCurves::fa_conditional(double tau) const {
  const auto below = std::lower_bound(negative_.begin(), negative_.end(), tau) - negative_.begin();
  return static_cast<double>(negative_.size() - static_cast<std::size_t>(below)) /
         static_cast<double>(negative_.size());
}

double EmpiricalCurves::md_match(double tau) const {
  check_tau(tau);
  return p_err_dl_ + (1.0 - p_err_dl_) * md_conditional(tau);
}

double EmpiricalCurves::fa_match(double tau) const {
  check_tau(tau);
  return (1.0 - p_err_dl_) * fa_conditional(tau);
}

ScoreSamples read_score_file(std::istream& in) {
  ScoreSamples samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    double score = 0.0;
    std::string label;
    if (!(fields >> score >> label)) {
      throw std::runtime_error("score file line " + std::to_string(line_no) +
                               ": expected \"<score> <pos|neg>\"");
    }
    if (label == "pos" || label == "1") {
      samples.positive.push_back(score);
    } else if (label == "neg" || label == "0") {
      samples.negative.push_back(score);
    } else {
      throw std::runtime_error("score file line " + std::to_string(line_no) + ": unknown label '" +
                               label + "'");
    }
  }
  return samples;
}

EmpiricalCurves calibrate_empirical(std::vector<double> positive_scores,
                                    std::vector<double> negative_scores, double p_err_dl) {
  return EmpiricalCurves(std::move(positive_scores), std::move(negative_scores), p_err_dl);
}

TxRates tx_rates(double tau, const MatchStatistics& stats, const Population& population) {
  const double m = population.num_devices;
  return {m * population.p_pos * (1.0 - stats.md_match(tau)),
          m * (1.0 - population.p_pos) * stats.fa_match(tau)};
}

double expected_tp(double tau, const MatchStatistics& stats, const Population& population,
                   const ChannelParams& channel) {
  const TxRates rates = tx_rates(tau, stats, population);
  if (!channel.is_aloha() && rates.total() >= channel.slots) return 0.0;
  return rates.lambda_tp * (1.0 - channel.uplink_error(rates.total()));
}

MdFa end_to_end_md_fa(double tau, const MatchStatistics& stats, const Population& population,
                      const ChannelParams& channel) {
  const double md = stats.md_match(tau);
  const double fa = stats.fa_match(tau);
  const double p_ul = channel.uplink_error(tx_rates(tau, stats, population).total());
  return {md + p_ul * (1.0 - md), (1.0 - p_ul) * fa};
}

double psi(double tau, const MatchParams& params, int slots) {
  check_tau(tau);
  if (slots < 1) throw std::domain_error("psi: need at least one slot");
  const double l = params.query_dim;
  const double t = scaled_threshold(tau, params.query_dim);
  if (t == 0.0) return slots;
  const double nu = 0.5 * l - 1.0;
  const double gamma_low = reg_gamma_lower(0.5 * l, 0.25 * t);

  // pair term 2^{l-1} Γ(ν+1) (2x)^{-ν} e^{-G/4} I_ν(x) with x = ½√(G τ̃);
  // it tends to 2 e^{-G/4} as x -> 0
  const double log_const = (l - 1.0) * std::log(2.0) + std::lgamma(nu + 1.0);
  double pair_sum = 0.0;
  for (Eigen::Index i = 0; i < params.gains.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < params.gains.cols(); ++j) {
      const double g = std::max(0.0, params.gains(i, j));
      const double x = 0.5 * std::sqrt(g * t);
      if (x == 0.0) {
        pair_sum += 2.0 * std::exp(-0.25 * g);
      } else {
        pair_sum += std::exp(log_const - nu * std::log(2.0 * x) - 0.25 * g + log_bessel_i(nu, x));
      }
    }
  }
  const double z = params.num_classes;
  const double mix = params.p_pos + (1.0 - params.p_pos) * pair_sum / (z * (z - 1.0));
  return slots - params.num_devices * (1.0 - params.p_err_dl) * gamma_low * mix;
}

const char* to_string(ThresholdSolver solver) {
  switch (solver) {
    case ThresholdSolver::aloha_root: return "aloha_root";
    case ThresholdSolver::irsa_multistart: return "irsa_multistart";
    case ThresholdSolver::grid: return "grid";
  }
  return "unknown";
}

namespace {

void fill_solution(ThresholdSolution& sol, const MatchStatistics& stats, const Population& population,
                   const ChannelParams& channel) {
  const TxRates rates = tx_rates(sol.tau, stats, population);
  sol.lambda_tp = rates.lambda_tp;
  sol.lambda_fa = rates.lambda_fa;
  sol.p_err_ul = channel.uplink_error(rates.total());
  sol.expected_tp = expected_tp(sol.tau, stats, population, channel);
}

}  // namespace

ThresholdSolution solve_threshold_aloha(const MatchParams& params, int slots, double lower,
                                        double upper) {
  if (!(lower > 0.0 && lower < upper && upper <= 1.0)) {
    throw std::domain_error("solve_threshold_aloha: need 0 < lower < upper <= 1");
  }
  ThresholdSolution sol;
  sol.solver = ThresholdSolver::aloha_root;
  const double tol = 1e-9 * slots;

  double lo = lower;
  double hi = upper;
  const double psi_lo = psi(lo, params, slots);
  const double psi_hi = psi(hi, params, slots);
  if (psi_lo >= 0.0) {
    sol.tau = lo;
    sol.residual = psi_lo;
    sol.boundary = true;
  } else if (psi_hi <= 0.0) {
    sol.tau = hi;
    sol.residual = psi_hi;
    sol.boundary = true;
  } else {
    double best_tau = hi;
    double best_psi = psi_hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double value = psi(mid, params, slots);
      ++sol.iterations;
      if (std::abs(value) < std::abs(best_psi)) {
        best_tau = mid;
        best_psi = value;
      }
      if (value == 0.0) break;
      if (value < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (std::abs(best_psi) <= tol && hi - lo <= 1e-14) break;
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    }
    sol.tau = best_tau;
    sol.residual = best_psi;
  }

  ChannelParams channel;
  channel.p_err_dl = params.p_err_dl;
  channel.slots = slots;
  fill_solution(sol, ClosedFormMatch(params), {params.num_devices, params.p_pos}, channel);
  return sol;
}

double feasible_tau_lower_bound(const MatchStatistics& stats, const Population& population,
                                int slots) {
  auto total = [&](double tau) { return tx_rates(tau, stats, population).total(); };
  if (total(kTauMin) <= slots) return kTauMin;
  double lo = kTauMin;  // infeasible
  double hi = 1.0;      // feasible: λ(1) is (numerically) zero
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (total(mid) <= slots) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

ThresholdSolution solve_threshold_irsa(const MatchStatistics& stats, const Population& population,
                                       const ChannelParams& channel, int starts) {
  if (starts < 1) throw std::invalid_argument("solve_threshold_irsa: need at least one start");
  ThresholdSolution sol;
  sol.solver = ThresholdSolver::irsa_multistart;
  sol.tau_lb = channel.is_aloha() ? kTauMin : feasible_tau_lower_bound(stats, population, channel.slots);

  int evaluations = 0;
  auto objective = [&](double tau) {
    ++evaluations;
    return expected_tp(tau, stats, population, channel);
  };

  const std::vector<double> seeds =
      starts == 1 ? std::vector<double>{0.5 * (sol.tau_lb + 1.0)} : linspace(sol.tau_lb, 1.0, starts);
  double best_tau = seeds.front();
  double best_value = -std::numeric_limits<double>::infinity();
  auto consider = [&](double tau, double value) {
    if (value > best_value) {
      best_value = value;
      best_tau = tau;
    }
  };

  constexpr double kInvPhi = 0.6180339887498949;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    consider(seeds[k], objective(seeds[k]));
    double a = k == 0 ? sol.tau_lb : seeds[k - 1];
    double b = k + 1 == seeds.size() ? 1.0 : seeds[k + 1];
    if (!(b > a)) continue;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = objective(c);
    double fd = objective(d);
    while (b - a > 1e-12) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = objective(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = objective(d);
      }
    }
    if (fc >= fd) {
      consider(c, fc);
    } else {
      consider(d, fd);
    }
  }

  sol.tau = best_tau;
  sol.iterations = evaluations;
  fill_solution(sol, stats, population, channel);
  return sol;
}

ThresholdSolution solve_threshold_grid(const MatchStatistics& stats, const Population& population,
                                       const ChannelParams& channel,
                                       const std::vector<double>& candidates) {
  ThresholdSolution sol;
  sol.solver = ThresholdSolver::grid;
  double best_value = -std::numeric_limits<double>::infinity();
  for (double tau : candidates) {
    check_tau(tau);
    const double value = expected_tp(tau, stats, population, channel);
    ++sol.iterations;
    if (value > best_value) {
      best_value = value;
      sol.tau = tau;
    }
  }
  if (sol.iterations == 0) throw std::invalid_argument("solve_threshold_grid: no candidates");
  fill_solution(sol, stats, population, channel);
  return sol;
}

ThresholdSolution solve_threshold(const ClosedFormMatch& stats, const ChannelParams& channel) {
  if (channel.is_aloha()) return solve_threshold_aloha(stats.params(), channel.slots);
  return solve_threshold_irsa(stats, stats.population(), channel);
}

std::vector<double> linspace(double lower, double upper, int count) {
  if (count < 1) throw std::invalid_argument("linspace: count must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = lower;
    return out;
  }
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = lower + (upper - lower) * i / (count - 1);
  }
  out.back() = upper;
  return out;
}

}  // namespace sqra
