#pragma once

// Network parameters for the two-class (PU over SU) N-server priority queue,
// plus the rate transforms that fold access delay, sensing overhead and
// channel imperfections into the model.
//
// Units: rates in packets/second, times in seconds.

#include <cmath>
#include <numeric>
#include <span>
#include <string>

#include "crnq/error.hpp"

namespace crnq {

class ClassParams {
 public:
  ClassParams(double lambda, double mu) : lambda_(lambda), mu_(mu) {
    if (!(mu > 0.0) || !std::isfinite(mu))
      throw DomainError("service rate must be positive and finite (mu = " + std::to_string(mu) + ")");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw DomainError("arrival rate must be non-negative and finite (lambda = " +
                        std::to_string(lambda) + ")");
  }

  double lambda() const noexcept { return lambda_; }
  double mu() const noexcept { return mu_; }
  double rho() const noexcept { return lambda_ / mu_; }

  bool operator==(const ClassParams&) const = default;

 private:
  double lambda_;
  double mu_;
};

struct Utilization {
  double rho_pu;
  double rho_su;
  double rho_total;
};

struct StabilityVerdict {
  bool stable;
  double rho_total;
  int n_servers;
};

// Class 1 (PU) has absolute preemptive priority over class 2 (SU).
class NetworkModel {
 public:
  NetworkModel(int n_servers, ClassParams pu, ClassParams su)
      : n_servers_(n_servers), pu_(pu), su_(su) {
    if (n_servers < 1)
      throw DomainError("server count must be at least 1 (N = " + std::to_string(n_servers) + ")");
  }

  int n_servers() const noexcept { return n_servers_; }
  const ClassParams& pu() const noexcept { return pu_; }
  const ClassParams& su() const noexcept { return su_; }

  NetworkModel with_pu(ClassParams pu) const { return {n_servers_, pu, su_}; }
  NetworkModel with_su(ClassParams su) const { return {n_servers_, pu_, su}; }

  // The same network with the class labels exchanged (SU promoted to class 1).
  NetworkModel swapped() const { return {n_servers_, su_, pu_}; }

  bool operator==(const NetworkModel&) const = default;

 private:
  int n_servers_;
  ClassParams pu_;
  ClassParams su_;
};

struct AccessTiming {
  double d_access;  // seconds >= 0
  double t_s;       // seconds > 0

  bool operator==(const AccessTiming&) const = default;
};

struct SensingConfig {
  double delta_t;   // sensing time per period, seconds
  double t_period;  // sensing period, seconds

  double p_d() const noexcept { return delta_t / t_period; }

  bool operator==(const SensingConfig&) const = default;
};

struct ImperfectionConfig {
  double p_d;     // detection probability in (0, 1]
  double per_pu;  // packet error rate in [0, 1)
  double per_su;  // packet error rate in [0, 1)

  bool operator==(const ImperfectionConfig&) const = default;
};

inline Utilization utilization(const NetworkModel& model) noexcept {
  const double rho_pu = model.pu().rho();
  const double rho_su = model.su().rho();
  return {rho_pu, rho_su, rho_pu + rho_su};
}

inline StabilityVerdict check_stability(const NetworkModel& model) noexcept {
  const double rho = utilization(model).rho_total;
  return {rho >= 0.0 && rho < static_cast<double>(model.n_servers()), rho, model.n_servers()};
}

inline void require_stable(const NetworkModel& model, const std::string& context = {}) {
  const auto verdict = check_stability(model);
  if (!verdict.stable) throw InstabilityError(verdict.rho_total, verdict.n_servers, context);
}

inline double service_rate_from_access(const AccessTiming& t) {
  if (!(t.d_access >= 0.0) || !(t.t_s > 0.0))
    throw DomainError("access timing requires d_access >= 0 and t_s > 0");
  return 1.0 / (t.d_access + t.t_s);
}

// Aggregates N independent per-channel PU queues into one N-server arrival stream.
inline double aggregate_primary(std::span<const double> per_channel_rates) {
  if (per_channel_rates.empty()) throw DomainError("no channels: per-channel rate list is empty");
  for (double r : per_channel_rates)
    if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("per-channel arrival rates must be >= 0");
  return std::accumulate(per_channel_rates.begin(), per_channel_rates.end(), 0.0);
}

// Half-duplex sensing steals a fraction p_D of every channel from the SU side.
// PU parameters are untouched; mu_su -> mu_su * (1 - p_D).
inline NetworkModel apply_sensing(const NetworkModel& model, const SensingConfig& s) {
  if (!(s.delta_t >= 0.0) || !(s.t_period > s.delta_t))
    throw DomainError("sensing requires 0 <= delta_t < t_period");
  require_stable(model, "baseline model");
  if (s.delta_t == 0.0) return model;
  const double keep = 1.0 - s.p_d();
  NetworkModel refined =
      model.with_su(ClassParams(model.su().lambda(), model.su().mu() * keep));
  require_stable(refined, "refinement-induced instability (sensing)");
  return refined;
}

inline double packet_loss_probability(double p_d, double per) {
  if (!(p_d >= 0.0 && p_d <= 1.0) || !(per >= 0.0 && per <= 1.0))
    throw DomainError("packet_loss_probability: inputs must lie in [0, 1]");
  return 1.0 - p_d * (1.0 - per);
}

// Geometric retransmissions stretch each class's service time by 1 / (1 - P_PL).
inline NetworkModel apply_imperfections(const NetworkModel& model, const ImperfectionConfig& c) {
  if (!(c.p_d > 0.0 && c.p_d <= 1.0)) throw DomainError("detection probability must lie in (0, 1]");
  if (!(c.per_pu >= 0.0 && c.per_pu < 1.0) || !(c.per_su >= 0.0 && c.per_su < 1.0))
    throw DomainError("packet error rates must lie in [0, 1)");
  const double keep_pu = c.p_d * (1.0 - c.per_pu);
  const double keep_su = c.p_d * (1.0 - c.per_su);
  NetworkModel refined(model.n_servers(),
                       ClassParams(model.pu().lambda(), model.pu().mu() * keep_pu),
                       ClassParams(model.su().lambda(), model.su().mu() * keep_su));
  require_stable(refined, "refinement-induced instability (imperfections)");
  return refined;
}

}  // namespace crnq
