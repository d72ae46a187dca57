#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "crnq/error.hpp"

namespace crnq::sim {

enum class Topology { Decoupled, Coupled };

struct SimConfig {
  std::uint64_t seed = 1;
  Topology topology = Topology::Decoupled;
  std::uint64_t warmup_departures = 20'000;
  std::uint64_t measured_departures = 100'000;
  int replications = 10;
  // 0 picks 40 events per simulated departure plus slack.
  std::uint64_t event_budget = 0;

  std::uint64_t effective_event_budget() const {
    return event_budget != 0 ? event_budget
                             : 40 * (warmup_departures + measured_departures) + 100'000;
  }

  bool operator==(const SimConfig&) const = default;
};

// Default warmup is 20% of the measured departures.
inline SimConfig make_sim_config(std::uint64_t seed, std::uint64_t measured, int replications,
                                 Topology topology = Topology::Decoupled) {
  return {seed, topology, measured / 5, measured, replications, 0};
}

inline void validate(const SimConfig& cfg, int n_servers) {
  if (cfg.replications < 1) throw DomainError("replications must be at least 1");
  if (cfg.measured_departures < 10ULL * static_cast<std::uint64_t>(n_servers))
    throw DomainError("measured_departures must be at least 10 * N");
}

struct StationSpec {
  double lambda;
  double mu;

  bool operator==(const StationSpec&) const = default;
};

// Original topology: N independent single-server PU channels sharing one
// service rate, and M SU stations contending for whatever channels are idle.
struct CoupledSpec {
  std::vector<double> per_channel_pu_lambda;
  double mu_pu = 1.0;
  std::vector<StationSpec> su_stations;

  int n_channels() const { return static_cast<int>(per_channel_pu_lambda.size()); }

  bool operator==(const CoupledSpec&) const = default;
};

enum class EventKind { PuArrival, PuDeparture, SuArrival, SuDeparture };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::PuArrival: return "pu_arrival";
    case EventKind::PuDeparture: return "pu_departure";
    case EventKind::SuArrival: return "su_arrival";
    case EventKind::SuDeparture: return "su_departure";
  }
  return "unknown";
}

// State after an event has been fully processed. pu_busy / su_busy count
// servers occupied by each class, which the audits compare against
// min(i, N) and min(j, max(N - i, 0)).
struct EventRecord {
  double time;
  EventKind kind;
  int cls;      // 1 = PU, 2 = SU
  int channel;  // -1 when the packet was queued without a server
  int pu_in_system;
  int su_in_system;
  int pu_busy;
  int su_busy;
  int idle_channels_with_waiting_su = 0;
};

// Output of one replication, measured after the warmup departures.
struct RunResult {
  double d_pu = std::numeric_limits<double>::quiet_NaN();
  double d_su = std::numeric_limits<double>::quiet_NaN();
  double mean_q_pu = 0.0;
  double mean_q_su = 0.0;
  std::uint64_t departures_pu = 0;
  std::uint64_t departures_su = 0;
  std::uint64_t events = 0;
  double window = 0.0;
  std::vector<double> d_su_per_station;
};

struct Metric {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double ci_halfwidth = std::numeric_limits<double>::quiet_NaN();
};

struct SimEstimate {
  Topology topology = Topology::Decoupled;
  std::uint64_t seed = 0;
  int replications = 0;
  double lambda_pu = 0.0;
  double lambda_su = 0.0;
  double mu_pu = 0.0;
  double mu_su = 0.0;
  Metric d_pu, d_su, w_pu, w_su, mean_q_pu, mean_q_su;
  std::vector<Metric> d_su_per_station;
  std::uint64_t events_processed = 0;
  std::uint64_t measured_departures = 0;
  std::vector<RunResult> runs;
};

// Accumulates per-class delays and time-integrated queue lengths over the
// measurement window, which opens at the warmup-th departure.
class WindowStats {
 public:
  WindowStats(std::uint64_t warmup, std::uint64_t measured)
      : warmup_(warmup), measured_(measured), open_(warmup == 0) {}

  void advance(double now, int pu_in_system, int su_in_system) {
    if (open_) {
      const double dt = now - last_;
      area_pu_ += dt * pu_in_system;
      area_su_ += dt * su_in_system;
    }
    last_ = now;
  }

  // Returns true once the measured departures are complete.
  bool depart(double now, int cls, double delay, int station = -1) {
    ++seen_;
    if (!open_) {
      if (seen_ >= warmup_) {
        open_ = true;
        start_ = now;
        last_ = now;
      }
      return false;
    }
    if (cls == 1) {
      sum_pu_ += delay;
      ++count_pu_;
    } else {
      sum_su_ += delay;
      ++count_su_;
      if (station >= 0) {
        if (station_sum_.size() <= static_cast<std::size_t>(station)) {
          station_sum_.resize(static_cast<std::size_t>(station) + 1, 0.0);
          station_count_.resize(static_cast<std::size_t>(station) + 1, 0);
        }
        station_sum_[static_cast<std::size_t>(station)] += delay;
        ++station_count_[static_cast<std::size_t>(station)];
      }
    }
    end_ = now;
    return count_pu_ + count_su_ >= measured_;
  }

  std::uint64_t departures_seen() const { return seen_; }

  RunResult result(std::uint64_t events, int stations = 0) const {
    RunResult r;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    r.window = end_ - start_;
    r.departures_pu = count_pu_;
    r.departures_su = count_su_;
    r.d_pu = count_pu_ ? sum_pu_ / static_cast<double>(count_pu_) : nan;
    r.d_su = count_su_ ? sum_su_ / static_cast<double>(count_su_) : nan;
    r.mean_q_pu = r.window > 0.0 ? area_pu_ / r.window : 0.0;
    r.mean_q_su = r.window > 0.0 ? area_su_ / r.window : 0.0;
    r.events = events;
    for (int s = 0; s < stations; ++s) {
      const auto k = static_cast<std::size_t>(s);
      r.d_su_per_station.push_back(k < station_count_.size() && station_count_[k]
                                       ? station_sum_[k] / static_cast<double>(station_count_[k])
                                       : nan);
    }
    return r;
  }

 private:
  std::uint64_t warmup_;
  std::uint64_t measured_;
  std::uint64_t seen_ = 0;
  bool open_;
  double start_ = 0.0;
  double end_ = 0.0;
  double last_ = 0.0;
  double area_pu_ = 0.0;
  double area_su_ = 0.0;
  double sum_pu_ = 0.0;
  double sum_su_ = 0.0;
  std::uint64_t count_pu_ = 0;
  std::uint64_t count_su_ = 0;
  std::vector<double> station_sum_;
  std::vector<std::uint64_t> station_count_;
};

}  // namespace crnq::sim
