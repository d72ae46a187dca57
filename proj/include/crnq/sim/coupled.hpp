#pragma once

// Coupled topology: every channel is its own single-server PU queue; SU
// stations transmit their waiting packets on any channel with no PU present.
// A PU arrival on a channel carrying an SU packet pre-empts it, and the
// packet resumes on the next idle channel. Idle channels are offered to
// stations in round-robin order.

#include <cstdint>
#include <deque>
#include <vector>

#include "crnq/error.hpp"
#include "crnq/sim/event_queue.hpp"
#include "crnq/sim/rng.hpp"
#include "crnq/sim/types.hpp"

namespace crnq::sim {

namespace streams {
inline constexpr std::uint64_t kChannelPuArrival = 1ULL << 32;
inline constexpr std::uint64_t kChannelPuService = 2ULL << 32;
inline constexpr std::uint64_t kStationArrival = 3ULL << 32;
inline constexpr std::uint64_t kStationService = 4ULL << 32;
}  // namespace streams

inline void validate(const CoupledSpec& spec) {
  if (spec.per_channel_pu_lambda.empty()) throw DomainError("coupled topology needs at least one channel");
  if (spec.su_stations.empty()) throw DomainError("coupled topology needs at least one SU station");
  if (!(spec.mu_pu > 0.0)) throw DomainError("PU service rate must be positive");
  double rho = 0.0;
  for (double l : spec.per_channel_pu_lambda) {
    if (!(l >= 0.0)) throw DomainError("per-channel PU arrival rates must be >= 0");
    if (!(l < spec.mu_pu))
      throw InstabilityError(l / spec.mu_pu, 1, "PU channel overloaded");
    rho += l / spec.mu_pu;
  }
  for (const auto& st : spec.su_stations) {
    if (!(st.lambda >= 0.0) || !(st.mu > 0.0))
      throw DomainError("SU stations need lambda >= 0 and mu > 0");
    rho += st.lambda / st.mu;
  }
  if (!(rho < spec.n_channels())) throw InstabilityError(rho, spec.n_channels(), "simulation refused");
}

class CoupledSimulator {
 public:
  CoupledSimulator(CoupledSpec spec, const SimConfig& cfg) : spec_(std::move(spec)), cfg_(cfg) {
    validate(spec_);
    validate(cfg, spec_.n_channels());
  }

  const CoupledSpec& spec() const { return spec_; }

  RunResult run(std::uint64_t replication, std::vector<EventRecord>* log = nullptr) const {
    Run r(spec_, cfg_, replication, log);
    return r.execute();
  }

 private:
  struct SuPacket {
    double arrival;
    double remaining;
  };

  enum class Occupant { Idle, Pu, Su };

  struct Channel {
    std::deque<double> pu_queue;  // arrival times, head in service
    Occupant occupant = Occupant::Idle;
    int station = -1;
    SuPacket su{};
    double started = 0.0;
    EventId completion = 0;
  };

  struct Event {
    EventKind kind;
    int channel;
    int station;
  };

  class Run {
   public:
    Run(const CoupledSpec& spec, const SimConfig& cfg, std::uint64_t rep,
        std::vector<EventRecord>* log)
        : spec_(spec),
          budget_(cfg.effective_event_budget()),
          channels_(static_cast<std::size_t>(spec.n_channels())),
          waiting_(spec.su_stations.size()),
          stats_(cfg.warmup_departures, cfg.measured_departures),
          log_(log) {
      for (int c = 0; c < spec.n_channels(); ++c) {
        pu_arrivals_.emplace_back(derive_seed(cfg.seed, rep, streams::kChannelPuArrival + c));
        pu_service_.emplace_back(derive_seed(cfg.seed, rep, streams::kChannelPuService + c));
      }
      for (std::size_t m = 0; m < spec.su_stations.size(); ++m) {
        su_arrivals_.emplace_back(derive_seed(cfg.seed, rep, streams::kStationArrival + m));
        su_service_.emplace_back(derive_seed(cfg.seed, rep, streams::kStationService + m));
      }
    }

    RunResult execute() {
      for (int c = 0; c < spec_.n_channels(); ++c) schedule_pu_arrival(c);
      for (int m = 0; m < stations(); ++m) schedule_su_arrival(m);

      std::uint64_t events = 0;
      bool done = false;
      while (!done) {
        auto next = queue_.pop();
        if (!next) break;
        if (++events > budget_) throw SimBudgetError(events - 1, stats_.departures_seen());
        now_ = next->time;
        stats_.advance(now_, pu_in_system_, su_in_system_);
        const Event ev = next->payload;
        switch (ev.kind) {
          case EventKind::PuArrival: on_pu_arrival(ev.channel); break;
          case EventKind::PuDeparture: done = on_pu_departure(ev.channel); break;
          case EventKind::SuArrival: on_su_arrival(ev.station); break;
          case EventKind::SuDeparture: done = on_su_departure(ev.channel); break;
        }
      }
      return stats_.result(events, stations());
    }

   private:
    int stations() const { return static_cast<int>(spec_.su_stations.size()); }
    Channel& channel(int c) { return channels_[static_cast<std::size_t>(c)]; }

    void schedule_pu_arrival(int c) {
      const double rate = spec_.per_channel_pu_lambda[static_cast<std::size_t>(c)];
      if (rate > 0.0)
        queue_.push(now_ + pu_arrivals_[static_cast<std::size_t>(c)].exponential(rate),
                    {EventKind::PuArrival, c, -1});
    }

    void schedule_su_arrival(int m) {
      const double rate = spec_.su_stations[static_cast<std::size_t>(m)].lambda;
      if (rate > 0.0)
        queue_.push(now_ + su_arrivals_[static_cast<std::size_t>(m)].exponential(rate),
                    {EventKind::SuArrival, -1, m});
    }

    void start_pu(int c) {
      auto& ch = channel(c);
      ch.occupant = Occupant::Pu;
      ch.started = now_;
      ch.completion = queue_.push(
          now_ + pu_service_[static_cast<std::size_t>(c)].exponential(spec_.mu_pu),
          {EventKind::PuDeparture, c, -1});
    }

    void start_su(int c, int m, SuPacket p) {
      auto& ch = channel(c);
      ch.occupant = Occupant::Su;
      ch.station = m;
      ch.su = p;
      ch.started = now_;
      ch.completion = queue_.push(now_ + p.remaining, {EventKind::SuDeparture, c, m});
    }

    // Hands idle channels to stations with waiting packets, round-robin.
    void dispatch() {
      for (int c = 0; c < spec_.n_channels(); ++c) {
        if (channel(c).occupant != Occupant::Idle) continue;
        int chosen = -1;
        for (int k = 0; k < stations(); ++k) {
          const int m = (next_station_ + k) % stations();
          if (!waiting_[static_cast<std::size_t>(m)].empty()) {
            chosen = m;
            break;
          }
        }
        if (chosen < 0) return;
        auto& q = waiting_[static_cast<std::size_t>(chosen)];
        const SuPacket p = q.front();
        q.pop_front();
        start_su(c, chosen, p);
        next_station_ = (chosen + 1) % stations();
      }
    }

    void on_pu_arrival(int c) {
      ++pu_in_system_;
      schedule_pu_arrival(c);
      auto& ch = channel(c);
      ch.pu_queue.push_back(now_);
      if (ch.occupant == Occupant::Su) {
        queue_.cancel(ch.completion);
        SuPacket p = ch.su;
        p.remaining -= now_ - ch.started;
        if (p.remaining < 0.0) p.remaining = 0.0;
        waiting_[static_cast<std::size_t>(ch.station)].push_front(p);
        ch.occupant = Occupant::Idle;
      }
      if (ch.occupant == Occupant::Idle) start_pu(c);
      dispatch();
      record(EventKind::PuArrival, 1, c);
    }

    bool on_pu_departure(int c) {
      --pu_in_system_;
      auto& ch = channel(c);
      const double delay = now_ - ch.pu_queue.front();
      ch.pu_queue.pop_front();
      ch.occupant = Occupant::Idle;
      if (!ch.pu_queue.empty()) start_pu(c);
      dispatch();
      record(EventKind::PuDeparture, 1, c);
      return stats_.depart(now_, 1, delay);
    }

    void on_su_arrival(int m) {
      ++su_in_system_;
      schedule_su_arrival(m);
      const auto& st = spec_.su_stations[static_cast<std::size_t>(m)];
      waiting_[static_cast<std::size_t>(m)].push_back(
          {now_, su_service_[static_cast<std::size_t>(m)].exponential(st.mu)});
      dispatch();
      record(EventKind::SuArrival, 2, -1);
    }

    bool on_su_departure(int c) {
      --su_in_system_;
      auto& ch = channel(c);
      const double delay = now_ - ch.su.arrival;
      const int m = ch.station;
      ch.occupant = Occupant::Idle;
      ch.station = -1;
      dispatch();
      record(EventKind::SuDeparture, 2, c);
      return stats_.depart(now_, 2, delay, m);
    }

    void record(EventKind kind, int cls, int c) {
      if (!log_) return;
      int pu_busy = 0;
      int su_busy = 0;
      int idle = 0;
      for (const auto& ch : channels_) {
        pu_busy += ch.occupant == Occupant::Pu;
        su_busy += ch.occupant == Occupant::Su;
        idle += ch.occupant == Occupant::Idle;
      }
      bool any_waiting = false;
      for (const auto& q : waiting_) any_waiting = any_waiting || !q.empty();
      log_->push_back({now_, kind, cls, c, pu_in_system_, su_in_system_, pu_busy, su_busy,
                       idle > 0 && any_waiting ? 1 : 0});
    }

    const CoupledSpec& spec_;
    std::uint64_t budget_;
    std::vector<RandomStream> pu_arrivals_, pu_service_, su_arrivals_, su_service_;
    std::vector<Channel> channels_;
    std::vector<std::deque<SuPacket>> waiting_;
    EventQueue<Event> queue_;
    WindowStats stats_;
    std::vector<EventRecord>* log_;
    double now_ = 0.0;
    int pu_in_system_ = 0;
    int su_in_system_ = 0;
    int next_station_ = 0;
  };

  CoupledSpec spec_;
  SimConfig cfg_;
};

}  // namespace crnq::sim
