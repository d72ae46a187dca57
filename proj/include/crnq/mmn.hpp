#pragma once

// Closed-form M/M/N results for the PU class. Preemptive priority makes the
// SU class invisible to the PU, so the PU alone is a plain M/M/N queue.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "crnq/error.hpp"
#include "crnq/model.hpp"

namespace crnq {

namespace detail {

inline double log_sum_exp(const std::vector<double>& terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

inline double log_factorial(int k) { return std::lgamma(static_cast<double>(k) + 1.0); }

inline void require_below_servers(double rho, int n) {
  if (n < 1) throw DomainError("server count must be at least 1");
  if (!(rho >= 0.0)) throw DomainError("utilization must be non-negative");
  if (!(rho < static_cast<double>(n))) throw InstabilityError(rho, n);
}

}  // namespace detail

struct MmnResult {
  double p_o;
  double total_delay;
  double mean_queue_length;
};

inline double erlang_idle_probability(double rho, int n) {
  detail::require_below_servers(rho, n);
  if (rho == 0.0) return 1.0;
  const double log_rho = std::log(rho);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k < n; ++k) terms.push_back(k * log_rho - detail::log_factorial(k));
  terms.push_back(n * log_rho - detail::log_factorial(n) - std::log1p(-rho / n));
  return std::exp(-detail::log_sum_exp(terms));
}

inline double mmn_total_delay(const ClassParams& params, int n) {
  if (params.lambda() == 0.0) throw UndefinedDelayError("delay undefined at zero arrival rate");
  const double rho = params.rho();
  detail::require_below_servers(rho, n);
  const double nd = static_cast<double>(n);
  const double log_p0 = std::log(erlang_idle_probability(rho, n));
  // (1/N) * rho^{N+1}/N! * P_o / (1 - rho/N)^2
  const double queued = std::exp((nd + 1.0) * std::log(rho) - detail::log_factorial(n) + log_p0 -
                                 std::log(nd) - 2.0 * std::log1p(-rho / nd));
  return (rho + queued) / params.lambda();
}

inline MmnResult mmn_analyze(const ClassParams& params, int n) {
  const double p0 = erlang_idle_probability(params.rho(), n);
  if (params.lambda() == 0.0) return {p0, 1.0 / params.mu(), 0.0};
  const double d = mmn_total_delay(params, n);
  return {p0, d, params.lambda() * d};
}

// Birth-death stationary law of the M/M/N queue length over k = 0..k_max.
inline std::vector<double> mmn_queue_length_pmf(const ClassParams& params, int n, int k_max) {
  const double rho = params.rho();
  detail::require_below_servers(rho, n);
  if (k_max < 0) throw DomainError("k_max must be non-negative");
  std::vector<double> pmf(static_cast<std::size_t>(k_max) + 1, 0.0);
  if (rho == 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  const double log_p0 = std::log(erlang_idle_probability(rho, n));
  const double log_rho = std::log(rho);
  const double log_ratio = std::log(rho / n);
  for (int k = 0; k <= k_max; ++k) {
    const double lp = k <= n ? log_p0 + k * log_rho - detail::log_factorial(k)
                             : log_p0 + n * log_rho - detail::log_factorial(n) + (k - n) * log_ratio;
    pmf[static_cast<std::size_t>(k)] = std::exp(lp);
  }
  return pmf;
}

// Same law, extended up to the first k whose cumulative mass exceeds
// 1 - tail_tolerance (at most max_len entries).
inline std::vector<double> mmn_queue_length_pmf_to_tolerance(const ClassParams& params, int n,
                                                             double tail_tolerance = 1e-12,
                                                             int max_len = 1'000'000) {
  const double rho = params.rho();
  detail::require_below_servers(rho, n);
  if (rho == 0.0) return {1.0};
  auto pmf = mmn_queue_length_pmf(params, n, 0);
  const double log_p0 = std::log(pmf[0]);
  const double log_rho = std::log(rho);
  const double log_ratio = std::log(rho / n);
  double cumulative = pmf[0];
  for (int k = 1; k < max_len && cumulative <= 1.0 - tail_tolerance; ++k) {
    const double lp = k <= n ? log_p0 + k * log_rho - detail::log_factorial(k)
                             : log_p0 + n * log_rho - detail::log_factorial(n) + (k - n) * log_ratio;
    pmf.push_back(std::exp(lp));
    cumulative += pmf.back();
  }
  return pmf;
}

}  // namespace crnq
