#pragma once

#include <stdexcept>
#include <string>

namespace crnq {

enum class ErrorCode {
  Domain,
  Instability,
  UndefinedDelay,
  TruncationCap,
  NonConvergence,
  SimBudget,
  DegenerateRegion,
  Infeasible,
  Config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCode::Domain, what) {}
};

// Raised whenever rho_pu + rho_su >= N, including after a refinement transform.
class InstabilityError : public Error {
 public:
  InstabilityError(double rho_total, int n_servers, const std::string& context = {})
      : Error(ErrorCode::Instability,
              (context.empty() ? std::string{} : context + ": ") +
                  "unstable model, stability requires rho_pu + rho_su < N (rho = " +
                  std::to_string(rho_total) + ", N = " + std::to_string(n_servers) + ")"),
        rho_total_(rho_total),
        n_servers_(n_servers) {}

  double rho_total() const noexcept { return rho_total_; }
  int n_servers() const noexcept { return n_servers_; }

 private:
  double rho_total_;
  int n_servers_;
};

class UndefinedDelayError : public Error {
 public:
  explicit UndefinedDelayError(const std::string& what)
      : Error(ErrorCode::UndefinedDelay, what) {}
};

class TruncationCapError : public Error {
 public:
  TruncationCapError(double achieved_tail_mass, int cap)
      : Error(ErrorCode::TruncationCap,
              "truncation cap exceeded (cap " + std::to_string(cap) +
                  " per axis, achieved tail mass " + std::to_string(achieved_tail_mass) + ")"),
        achieved_tail_mass_(achieved_tail_mass) {}

  double achieved_tail_mass() const noexcept { return achieved_tail_mass_; }

 private:
  double achieved_tail_mass_;
};

class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(double last_residual)
      : Error(ErrorCode::NonConvergence,
              "stationary solve did not reach the residual tolerance (last residual " +
                  std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class SimBudgetError : public Error {
 public:
  SimBudgetError(unsigned long long events, unsigned long long departures)
      : Error(ErrorCode::SimBudget,
              "event budget exhausted after " + std::to_string(events) + " events (" +
                  std::to_string(departures) + " departures recorded)"),
        events_(events),
        departures_(departures) {}

  unsigned long long events() const noexcept { return events_; }
  unsigned long long departures() const noexcept { return departures_; }

 private:
  unsigned long long events_;
  unsigned long long departures_;
};

class DegenerateRegionError : public Error {
 public:
  explicit DegenerateRegionError(const std::string& what)
      : Error(ErrorCode::DegenerateRegion, what) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(ErrorCode::Infeasible, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

}  // namespace crnq
