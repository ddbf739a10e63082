#ifndef PADSIM_SIM_ENGINE_HPP
#define PADSIM_SIM_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "padsim/sim/errors.hpp"
#include "padsim/sim/time.hpp"

namespace padsim {

enum class EventKind : std::uint8_t {
  CellArrival,
  CellIngress,
  SlotTimer,
  PaddingTimer,
  DownloadStart,
  Timeout,
  MachineTransition,
  ServerSend,
  BackgroundToggle,
  Generic,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::CellArrival: return "cell-arrival";
    case EventKind::CellIngress: return "cell-ingress";
    case EventKind::SlotTimer: return "slot-timer";
    case EventKind::PaddingTimer: return "padding-timer";
    case EventKind::DownloadStart: return "download-start";
    case EventKind::Timeout: return "timeout";
    case EventKind::MachineTransition: return "machine-transition";
    case EventKind::ServerSend: return "server-send";
    case EventKind::BackgroundToggle: return "background-toggle";
    case EventKind::Generic: return "generic";
  }
  return "?";
}

using EntityId = std::uint32_t;
using EventHandle = std::uint64_t;

template <typename Payload>
struct BasicEvent {
  SimTime fire_at;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Generic;
  EntityId target = 0;
  Payload payload{};
};

struct DispatchRecord {
  SimTime fire_at;
  std::uint64_t seq;
  EventKind kind;
  EntityId target;

  bool operator==(const DispatchRecord&) const = default;
};

/// Single-threaded discrete-event core. Events are dispatched in strict
/// (fire_at, seq) order; seq is assigned at schedule time and never reused.
template <typename Payload>
class BasicEngine {
public:
  using Event = BasicEvent<Payload>;
  using Dispatcher = std::function<void(const Event&)>;

  BasicEngine() = default;
  BasicEngine(const BasicEngine&) = delete;
  BasicEngine& operator=(const BasicEngine&) = delete;

  void set_dispatcher(Dispatcher d) { dispatcher_ = std::move(d); }
  void keep_log(bool on) { keep_log_ = on; }

  SimTime now() const { return now_; }

  EventHandle schedule(SimTime at, EventKind kind, EntityId target, Payload payload = {}) {
    if (at < now_) {
      throw InvariantError("engine: event scheduled in the past (at=" + std::to_string(at.count()) +
                           "us, now=" + std::to_string(now_.count()) + "us)");
    }
    Event ev{at, next_seq_++, kind, target, std::move(payload)};
    const auto seq = ev.seq;
    heap_.push(std::move(ev));
    ++live_;
    return seq;
  }

  EventHandle schedule_in(SimTime delay, EventKind kind, EntityId target, Payload payload = {}) {
    return schedule(now_ + delay, kind, target, std::move(payload));
  }

  /// Cancelled events are skipped silently and never reach the log.
  void cancel(EventHandle h) {
    if (cancelled_.insert(h).second) --live_;
  }

  /// Records an instantaneous occurrence in the dispatch log without queueing
  /// it (used for machine transitions).
  void note(EventKind kind, EntityId target) {
    record(DispatchRecord{now_, next_seq_++, kind, target});
  }

  /// Dispatches every event with fire_at <= end, including ones scheduled by
  /// handlers during this call. Leaves the clock at `end`.
  std::size_t run_until(SimTime end) {
    std::size_t n = 0;
    while (!heap_.empty() && heap_.top().fire_at <= end) {
      if (dispatch_top()) ++n;
    }
    if (end > now_) now_ = end;
    return n;
  }

  /// Dispatches the next live event, if any. Returns false when idle.
  bool step() {
    while (!heap_.empty()) {
      if (dispatch_top()) return true;
    }
    return false;
  }

  bool idle() const { return live_ == 0; }
  std::size_t pending() const { return live_; }
  SimTime next_time() const {
    // cancelled heads may make this early; callers only use it as a bound
    return heap_.empty() ? SimTime::infinite() : heap_.top().fire_at;
  }

  std::uint64_t dispatched() const { return dispatched_; }
  std::uint64_t log_hash() const { return hash_; }
  const std::vector<DispatchRecord>& log() const { return log_; }

private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };

  bool dispatch_top() {
    Event ev = heap_.top();
    heap_.pop();
    if (auto it = cancelled_.find(ev.seq); it != cancelled_.end()) {
      cancelled_.erase(it);
      return false;
    }
    --live_;
    now_ = ev.fire_at;
    ++dispatched_;
    record(DispatchRecord{ev.fire_at, ev.seq, ev.kind, ev.target});
    if (dispatcher_) dispatcher_(ev);
    return true;
  }

  void record(const DispatchRecord& r) {
    mix(static_cast<std::uint64_t>(r.fire_at.count()));
    mix(r.seq);
    mix(static_cast<std::uint64_t>(r.kind));
    mix(r.target);
    if (keep_log_) log_.push_back(r);
  }

  void mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xffu;
      hash_ *= 0x100000001b3ull;
    }
  }

  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::unordered_set<std::uint64_t> cancelled_;
  Dispatcher dispatcher_;
  SimTime now_{0};
  std::uint64_t next_seq_ = 0;
  std::size_t live_ = 0;
  std::uint64_t dispatched_ = 0;
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
  bool keep_log_ = false;
  std::vector<DispatchRecord> log_;
};

} // namespace padsim

#endif // PADSIM_SIM_ENGINE_HPP
