#pragma once

// Decoupled topology: one N-server queue shared by an aggregated PU stream
// with absolute preemptive-resume priority and a tagged SU stream served FIFO
// on whatever servers the PUs leave free.

#include <cstdint>
#include <deque>
#include <vector>

#include "crnq/model.hpp"
#include "crnq/sim/event_queue.hpp"
#include "crnq/sim/rng.hpp"
#include "crnq/sim/types.hpp"

namespace crnq::sim {

namespace streams {
inline constexpr std::uint64_t kPuArrival = 0;
inline constexpr std::uint64_t kPuService = 1;
inline constexpr std::uint64_t kSuArrival = 2;
inline constexpr std::uint64_t kSuService = 3;
}  // namespace streams

class DecoupledSimulator {
 public:
  DecoupledSimulator(const NetworkModel& model, const SimConfig& cfg) : model_(model), cfg_(cfg) {
    require_stable(model, "simulation refused");
    validate(cfg, model.n_servers());
  }

  RunResult run(std::uint64_t replication, std::vector<EventRecord>* log = nullptr) const {
    Run r(model_, cfg_, replication, log);
    return r.execute();
  }

 private:
  struct SuPacket {
    double arrival;
    double remaining;  // work left, in seconds of service
  };

  enum class Occupant { Idle, Pu, Su };

  struct Server {
    Occupant occupant = Occupant::Idle;
    double pu_arrival = 0.0;
    SuPacket su{};
    double started = 0.0;
    std::uint64_t start_order = 0;
    EventId completion = 0;
  };

  struct Event {
    EventKind kind;
    int server;
  };

  class Run {
   public:
    Run(const NetworkModel& model, const SimConfig& cfg, std::uint64_t rep,
        std::vector<EventRecord>* log)
        : n_(model.n_servers()),
          lambda_pu_(model.pu().lambda()),
          mu_pu_(model.pu().mu()),
          lambda_su_(model.su().lambda()),
          mu_su_(model.su().mu()),
          budget_(cfg.effective_event_budget()),
          pu_arrivals_(derive_seed(cfg.seed, rep, streams::kPuArrival)),
          pu_service_(derive_seed(cfg.seed, rep, streams::kPuService)),
          su_arrivals_(derive_seed(cfg.seed, rep, streams::kSuArrival)),
          su_service_(derive_seed(cfg.seed, rep, streams::kSuService)),
          servers_(static_cast<std::size_t>(n_)),
          stats_(cfg.warmup_departures, cfg.measured_departures),
          log_(log) {}

    RunResult execute() {
      if (lambda_pu_ > 0.0) queue_.push(pu_arrivals_.exponential(lambda_pu_), {EventKind::PuArrival, -1});
      if (lambda_su_ > 0.0) queue_.push(su_arrivals_.exponential(lambda_su_), {EventKind::SuArrival, -1});

      std::uint64_t events = 0;
      bool done = false;
      while (!done) {
        auto next = queue_.pop();
        if (!next) break;
        if (++events > budget_) throw SimBudgetError(events - 1, stats_.departures_seen());
        now_ = next->time;
        stats_.advance(now_, pu_in_system_, su_in_system_);
        switch (next->payload.kind) {
          case EventKind::PuArrival: on_pu_arrival(); break;
          case EventKind::PuDeparture: done = on_pu_departure(next->payload.server); break;
          case EventKind::SuArrival: on_su_arrival(); break;
          case EventKind::SuDeparture: done = on_su_departure(next->payload.server); break;
        }
      }
      return stats_.result(events);
    }

   private:
    int idle_server() const {
      for (int s = 0; s < n_; ++s)
        if (servers_[static_cast<std::size_t>(s)].occupant == Occupant::Idle) return s;
      return -1;
    }

    void start_pu(int s, double arrival) {
      auto& srv = servers_[static_cast<std::size_t>(s)];
      srv.occupant = Occupant::Pu;
      srv.pu_arrival = arrival;
      srv.started = now_;
      srv.completion = queue_.push(now_ + pu_service_.exponential(mu_pu_), {EventKind::PuDeparture, s});
    }

    void start_su(int s, SuPacket p) {
      auto& srv = servers_[static_cast<std::size_t>(s)];
      srv.occupant = Occupant::Su;
      srv.su = p;
      srv.started = now_;
      srv.start_order = ++start_counter_;
      srv.completion = queue_.push(now_ + p.remaining, {EventKind::SuDeparture, s});
    }

    // Refill a freed server: waiting PUs first, then the SU queue head.
    void refill(int s) {
      auto& srv = servers_[static_cast<std::size_t>(s)];
      srv.occupant = Occupant::Idle;
      if (!pu_waiting_.empty()) {
        const double a = pu_waiting_.front();
        pu_waiting_.pop_front();
        start_pu(s, a);
      } else if (!su_waiting_.empty()) {
        const SuPacket p = su_waiting_.front();
        su_waiting_.pop_front();
        start_su(s, p);
      }
    }

    void on_pu_arrival() {
      ++pu_in_system_;
      queue_.push(now_ + pu_arrivals_.exponential(lambda_pu_), {EventKind::PuArrival, -1});
      int s = idle_server();
      if (s < 0) s = preempt_latest_su();
      if (s >= 0) {
        start_pu(s, now_);
      } else {
        pu_waiting_.push_back(now_);
      }
      record(EventKind::PuArrival, 1, s);
    }

    // Pre-empts the most recently started SU, if any; its remaining work goes
    // back to the head of the SU queue. Returns the freed server or -1.
    int preempt_latest_su() {
      int victim = -1;
      std::uint64_t latest = 0;
      for (int s = 0; s < n_; ++s) {
        const auto& srv = servers_[static_cast<std::size_t>(s)];
        if (srv.occupant == Occupant::Su && srv.start_order >= latest) {
          latest = srv.start_order;
          victim = s;
        }
      }
      if (victim < 0) return -1;
      auto& srv = servers_[static_cast<std::size_t>(victim)];
      queue_.cancel(srv.completion);
      SuPacket p = srv.su;
      p.remaining -= now_ - srv.started;
      if (p.remaining < 0.0) p.remaining = 0.0;
      su_waiting_.push_front(p);
      srv.occupant = Occupant::Idle;
      return victim;
    }

    bool on_pu_departure(int s) {
      --pu_in_system_;
      const double delay = now_ - servers_[static_cast<std::size_t>(s)].pu_arrival;
      refill(s);
      record(EventKind::PuDeparture, 1, s);
      return stats_.depart(now_, 1, delay);
    }

    void on_su_arrival() {
      ++su_in_system_;
      queue_.push(now_ + su_arrivals_.exponential(lambda_su_), {EventKind::SuArrival, -1});
      const SuPacket p{now_, su_service_.exponential(mu_su_)};
      const int s = idle_server();
      if (s >= 0) {
        start_su(s, p);
      } else {
        su_waiting_.push_back(p);
      }
      record(EventKind::SuArrival, 2, s);
    }

    bool on_su_departure(int s) {
      --su_in_system_;
      const double delay = now_ - servers_[static_cast<std::size_t>(s)].su.arrival;
      refill(s);
      record(EventKind::SuDeparture, 2, s);
      return stats_.depart(now_, 2, delay);
    }

    void record(EventKind kind, int cls, int channel) {
      if (!log_) return;
      int pu_busy = 0;
      int su_busy = 0;
      for (const auto& srv : servers_) {
        pu_busy += srv.occupant == Occupant::Pu;
        su_busy += srv.occupant == Occupant::Su;
      }
      log_->push_back({now_, kind, cls, channel, pu_in_system_, su_in_system_, pu_busy, su_busy,
                       (n_ - pu_busy - su_busy) > 0 && !su_waiting_.empty() ? 1 : 0});
    }

    int n_;
    double lambda_pu_, mu_pu_, lambda_su_, mu_su_;
    std::uint64_t budget_;
    RandomStream pu_arrivals_, pu_service_, su_arrivals_, su_service_;
    std::vector<Server> servers_;
    std::deque<double> pu_waiting_;
    std::deque<SuPacket> su_waiting_;
    EventQueue<Event> queue_;
    WindowStats stats_;
    std::vector<EventRecord>* log_;
    double now_ = 0.0;
    int pu_in_system_ = 0;
    int su_in_system_ = 0;
    std::uint64_t start_counter_ = 0;
  };

  NetworkModel model_;
  SimConfig cfg_;
};

}  // namespace crnq::sim
