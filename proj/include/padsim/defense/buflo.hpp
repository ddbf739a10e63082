#ifndef PADSIM_DEFENSE_BUFLO_HPP
#define PADSIM_DEFENSE_BUFLO_HPP

#include <deque>
#include <map>
#include <string>
#include <optional>
#include <vector>

#include "padsim/net/tunnel.hpp"
#include "padsim/sim/errors.hpp"

namespace padsim {

struct BufloConfig {
  SimTime slot = SimTime::ms(2);
  SimTime min_duration = SimTime::sec(10);
  bool client = true;  // client pads/holds server-bound
  bool middle = true;  // middle pads/holds client-bound

  void validate() const {
    if (slot <= SimTime{0}) throw ConfigError("buflo.slot_us must be > 0");
    if (min_duration < SimTime{0}) throw ConfigError("buflo.min_duration_s must be >= 0");
    if (!client && !middle) throw ConfigError("buflo.endpoints must name at least one endpoint");
  }
  bool active_at(Endpoint e) const { return e == Endpoint::Client ? client : middle; }
};

/// Interval during which a driver emitted one cell per slot. Slot boundaries
/// strictly inside (start, end) each carry exactly one cell.
struct BufloWindow {
  SimTime start;
  SimTime end = SimTime::infinite();
};

/// Constant-rate sender for one circuit endpoint: one cell per slot boundary
/// (multiples of the slot length from circuit open), real cell if one is
/// held, padding otherwise.
class BufloDriver {
public:
  BufloDriver(Engine& engine, TunnelPort& port, CircuitId circuit, Endpoint at, const BufloConfig& cfg,
              SimTime circuit_open, EntityId self)
      : engine_(engine), port_(port), circuit_(circuit), at_(at), cfg_(cfg), open_(circuit_open), self_(self) {}

  BufloDriver(const BufloDriver&) = delete;
  BufloDriver& operator=(const BufloDriver&) = delete;

  /// Takes a non-padding cell; it leaves at a later slot boundary.
  void hold(const Cell& cell) {
    queue_.push_back(cell);
    if (!active_) activate();
  }

  void on_slot(EventHandle h) {
    if (!timer_ || *timer_ != h) return;
    timer_.reset();
    if (!port_.circuit_open(circuit_)) {
      deactivate();
      return;
    }
    const SimTime now = engine_.now();
    if (queue_.empty() && now - activated_at_ >= cfg_.min_duration) {
      deactivate();
      return;
    }
    if (!queue_.empty()) {
      Cell c = queue_.front();
      queue_.pop_front();
      ++content_sent_;
      port_.release(circuit_, at_, c);
    } else {
      ++padding_sent_;
      port_.emit_padding(circuit_, at_);
    }
    if (active_) timer_ = engine_.schedule(now + cfg_.slot, EventKind::SlotTimer, self_);
  }

  void stop() {
    if (timer_) {
      engine_.cancel(*timer_);
      timer_.reset();
    }
    deactivate();
    queue_.clear();
  }

  bool active() const { return active_; }
  std::size_t held() const { return queue_.size(); }
  CircuitId circuit() const { return circuit_; }
  Endpoint endpoint() const { return at_; }
  SimTime circuit_open_time() const { return open_; }
  const BufloConfig& config() const { return cfg_; }
  const std::vector<BufloWindow>& windows() const { return windows_; }
  std::uint64_t content_sent() const { return content_sent_; }
  std::uint64_t padding_sent() const { return padding_sent_; }

private:
  void activate() {
    active_ = true;
    activated_at_ = engine_.now();
    windows_.push_back(BufloWindow{activated_at_});
    const auto slot = cfg_.slot.count();
    const auto k = (activated_at_ - open_).count() / slot + 1;
    timer_ = engine_.schedule(open_ + SimTime::us(k * slot), EventKind::SlotTimer, self_);
  }

  void deactivate() {
    if (!active_) return;
    active_ = false;
    windows_.back().end = engine_.now();
  }

  Engine& engine_;
  TunnelPort& port_;
  CircuitId circuit_;
  Endpoint at_;
  BufloConfig cfg_;
  SimTime open_;
  EntityId self_;
  std::deque<Cell> queue_;
  bool active_ = false;
  SimTime activated_at_{0};
  std::optional<EventHandle> timer_;
  std::vector<BufloWindow> windows_;
  std::uint64_t content_sent_ = 0;
  std::uint64_t padding_sent_ = 0;
};

struct SlotAuditResult {
  std::uint64_t slots_checked = 0;
  std::uint64_t violations = 0;
  std::vector<std::string> details;  // first few violations
};

/// Checks the constant-rate law against the tunnel egress log: every slot
/// boundary inside an active window carries exactly one egress cell for the
/// driver's circuit and direction, and no egress happens off-grid. Windows
/// still open are cut at `horizon`, the last dispatched instant.
template <typename EgressRange>
SlotAuditResult audit_slots(const std::vector<const BufloDriver*>& drivers, const EgressRange& egress,
                            SimTime horizon) {
  SlotAuditResult res;
  auto violation = [&](std::string msg) {
    ++res.violations;
    if (res.details.size() < 20) res.details.push_back(std::move(msg));
  };
  // index egress by (circuit, endpoint)
  std::map<std::pair<CircuitId, Endpoint>, std::vector<SimTime>> by_key;
  for (const auto& e : egress) by_key[{e.circuit, e.endpoint}].push_back(e.at);
  for (const auto* d : drivers) {
    const auto key = std::pair{d->circuit(), d->endpoint()};
    std::vector<SimTime> times;
    if (auto it = by_key.find(key); it != by_key.end()) times = it->second;
    const auto slot = d->config().slot.count();
    const auto open = d->circuit_open_time().count();
    std::size_t idx = 0;
    for (auto w : d->windows()) {
      if (w.end > horizon) w.end = horizon + SimTime::us(1);
      const auto first_k = (w.start.count() - open) / slot + 1;
      // egress before this window must already have been consumed
      while (idx < times.size() && times[idx] <= w.start) {
        violation("circuit " + std::to_string(d->circuit()) + ": egress at " + std::to_string(times[idx].count()) +
                  "us outside any slot window");
        ++idx;
      }
      for (auto k = first_k;; ++k) {
        const SimTime b{open + k * slot};
        if (!(b < w.end)) {
          // boundary coinciding with the window end may carry at most one cell
          if (b == w.end && idx < times.size() && times[idx] == b) ++idx;
          break;
        }
        ++res.slots_checked;
        std::size_t n = 0;
        while (idx < times.size() && times[idx] < b) {
          violation("circuit " + std::to_string(d->circuit()) + ": off-slot egress at " +
                    std::to_string(times[idx].count()) + "us");
          ++idx;
        }
        while (idx < times.size() && times[idx] == b) {
          ++n;
          ++idx;
        }
        if (n != 1) {
          violation("circuit " + std::to_string(d->circuit()) + ": slot " + std::to_string(b.count()) + "us carried " +
                    std::to_string(n) + " cells");
        }
      }
    }
    while (idx < times.size()) {
      violation("circuit " + std::to_string(d->circuit()) + ": egress at " + std::to_string(times[idx].count()) +
                "us after last window");
      ++idx;
    }
  }
  return res;
}

} // namespace padsim

#endif // PADSIM_DEFENSE_BUFLO_HPP
