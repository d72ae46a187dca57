#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <unordered_set>
#include <vector>

namespace crnq::sim {

using EventId = std::uint64_t;

// Future-event list: binary heap ordered by (time, insertion order), with
// lazy cancellation. Simultaneous events pop in the order they were pushed.
template <class Payload>
class EventQueue {
 public:
  struct Entry {
    double time;
    EventId id;
    Payload payload;
  };

  EventId push(double time, Payload payload) {
    const EventId id = next_id_++;
    heap_.push(Entry{time, id, std::move(payload)});
    return id;
  }

  void cancel(EventId id) { cancelled_.insert(id); }

  std::optional<Entry> pop() {
    while (!heap_.empty()) {
      Entry top = heap_.top();
      heap_.pop();
      if (auto it = cancelled_.find(top.id); it != cancelled_.end()) {
        cancelled_.erase(it);
        continue;
      }
      return top;
    }
    return std::nullopt;
  }

  bool empty() const { return heap_.size() == cancelled_.size(); }

 private:
  struct Later {
    bool operator()(const Entry& x, const Entry& y) const {
      return x.time != y.time ? x.time > y.time : x.id > y.id;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::unordered_set<EventId> cancelled_;
  EventId next_id_ = 0;
};

}  // namespace crnq::sim
