#pragma once

// Conservation laws for work-conserving priority queues and the performance
// vectors they imply under either absolute-priority ordering.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "crnq/error.hpp"
#include "crnq/mmn.hpp"
#include "crnq/model.hpp"

namespace crnq {

enum class Ordering { PuPriority, SuPriority };

struct PerformanceVector {
  double d_pu;
  double d_su;
  double w_pu;
  double w_su;
  Ordering ordering;
};

// Waiting-time vertices of the two-class achievable region:
//   a = W_PU with PU priority, b = W_PU with SU priority,
//   c = W_SU with PU priority, d = W_SU with SU priority.
struct RegionVertices {
  double a;
  double b;
  double c;
  double d;
  std::optional<NetworkModel> model;
};

// Throws unless a < b and d < c, the ordering every non-degenerate region has.
inline void validate_vertices(const RegionVertices& v) {
  if (!std::isfinite(v.a) || !std::isfinite(v.b) || !std::isfinite(v.c) || !std::isfinite(v.d))
    throw DomainError("region vertices must be finite");
  if (v.a == v.b && v.c == v.d) throw DegenerateRegionError("degenerate region: A = B and C = D");
  if (!(v.a < v.b) || !(v.d < v.c))
    throw DegenerateRegionError("region vertices must satisfy A < B and D < C");
}

// Kleinrock's single-server invariant: sum_i rho_i W_i = sum_i (rho_i/mu_i) / (1 - rho).
inline double kleinrock_weighted_sum(std::span<const ClassParams> classes) {
  double rho = 0.0;
  double work = 0.0;
  for (const auto& c : classes) {
    rho += c.rho();
    work += c.rho() / c.mu();
  }
  if (!(rho < 1.0)) throw InstabilityError(rho, 1, "single-server conservation");
  return work / (1.0 - rho);
}

// Multi-server conservation law: the value of rho_1 D_1 + rho_2 D_2,
//
//   V / ((N - rho) (1 + S)) + V,   V = rho_1/mu_1 + rho_2/mu_2,
//   S = sum_{k<N} N! (N - rho) / (k! N rho^{N-k}),
//
// with S summed in log space. Zero load returns 0.
inline double conservation_sum(const NetworkModel& model) {
  require_stable(model);
  const int n = model.n_servers();
  const double nd = static_cast<double>(n);
  const auto u = utilization(model);
  const double rho = u.rho_total;
  if (rho == 0.0) return 0.0;
  const double work = u.rho_pu / model.pu().mu() + u.rho_su / model.su().mu();

  const double log_common = detail::log_factorial(n) + std::log(nd - rho) - std::log(nd);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    terms.push_back(log_common - detail::log_factorial(k) - (nd - k) * std::log(rho));
  const double s = std::exp(detail::log_sum_exp(terms));
  return work / ((nd - rho) * (1.0 + s)) + work;
}

namespace detail {

// Delay of the low-priority class given the high-priority class sees M/M/N.
inline double low_priority_delay(const NetworkModel& ordered) {
  if (ordered.su().lambda() == 0.0)
    throw UndefinedDelayError("delay undefined at zero arrival rate (low-priority class)");
  const double total = conservation_sum(ordered);
  const double high = ordered.pu().lambda() > 0.0
                          ? ordered.pu().rho() * mmn_total_delay(ordered.pu(), ordered.n_servers())
                          : 0.0;
  return (total - high) / ordered.su().rho();
}

}  // namespace detail

// SU delay implied by the conservation law when PUs hold priority.
inline double secondary_delay_from_law(const NetworkModel& model) {
  require_stable(model);
  return detail::low_priority_delay(model);
}

inline PerformanceVector performance_vector(const NetworkModel& model, Ordering ordering) {
  require_stable(model);
  if (model.pu().lambda() == 0.0 || model.su().lambda() == 0.0)
    throw UndefinedDelayError("performance vector needs traffic in both classes");
  double d_pu = 0.0;
  double d_su = 0.0;
  if (ordering == Ordering::PuPriority) {
    d_pu = mmn_total_delay(model.pu(), model.n_servers());
    d_su = detail::low_priority_delay(model);
  } else {
    const NetworkModel flipped = model.swapped();
    d_su = mmn_total_delay(flipped.pu(), flipped.n_servers());
    d_pu = detail::low_priority_delay(flipped);
  }
  return {d_pu, d_su, d_pu - 1.0 / model.pu().mu(), d_su - 1.0 / model.su().mu(), ordering};
}

inline RegionVertices region_vertices(const NetworkModel& model) {
  const auto pu_first = performance_vector(model, Ordering::PuPriority);
  const auto su_first = performance_vector(model, Ordering::SuPriority);
  RegionVertices v{pu_first.w_pu, su_first.w_pu, pu_first.w_su, su_first.w_su, model};
  validate_vertices(v);
  return v;
}

}  // namespace crnq
