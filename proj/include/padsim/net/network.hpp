#ifndef PADSIM_NET_NETWORK_HPP
#define PADSIM_NET_NETWORK_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "padsim/net/cell.hpp"
#include "padsim/net/tunnel.hpp"
#include "padsim/sim/errors.hpp"

namespace padsim {

enum class Role : std::uint8_t { Client, Guard, Middle, Exit, Server };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::Client: return "client";
    case Role::Guard: return "guard";
    case Role::Middle: return "middle";
    case Role::Exit: return "exit";
    case Role::Server: return "server";
  }
  return "?";
}

struct HostSpec {
  std::string name;
  Role role = Role::Guard;
  double up_rate = 0.0;    // bytes/s, must be > 0
  double down_rate = 0.0;  // bytes/s, 0 = unlimited
  std::optional<std::uint32_t> queue_cap;
  SimTime access_latency = SimTime::ms(5);
};

/// Store-and-forward host: one aggregate FIFO egress pipe drained at up_rate,
/// an optional ingress pipe at down_rate.
struct Host {
  HostSpec spec;
  SimTime egress_ser{0};
  SimTime ingress_ser{0};
  SimTime egress_busy_until{0};
  SimTime ingress_busy_until{0};
  std::deque<SimTime> departures;  // cells not yet fully serialized
  std::uint64_t cells_sent = 0;
  std::uint64_t padding_sent = 0;
};

enum class CircuitState : std::uint8_t { Building, Open, Closed, Failed };

/// Path positions: client, guard, middle, exit, server.
inline constexpr std::uint8_t kClientPos = 0;
inline constexpr std::uint8_t kMiddlePos = 2;
inline constexpr std::uint8_t kServerPos = 4;

struct Circuit {
  CircuitId id = 0;
  std::array<HostId, 5> path{};
  CircuitState state = CircuitState::Building;
  SimTime opened_at{0};

  HostId client() const { return path[kClientPos]; }
  HostId server() const { return path[kServerPos]; }
  bool open() const { return state == CircuitState::Open; }
};

struct NetworkStats {
  std::uint64_t drops_closed = 0;
  std::uint64_t drops_unknown = 0;
  std::uint64_t drops_queue_full = 0;
  std::uint64_t cells_delivered = 0;
};

/// Consumer of cells that reach the circuit ends.
class Application {
public:
  virtual ~Application() = default;
  virtual void on_client_receive(CircuitId c, const Cell& cell) = 0;
  virtual void on_server_receive(CircuitId c, const Cell& cell) = 0;
  /// A padding cell was received (rx=true) or sent (rx=false) by the client.
  virtual void on_client_padding(CircuitId, bool /*rx*/) {}
};

/// Serialization time of one cell at `rate` bytes/s, rounded to the nearest
/// microsecond and never zero.
inline SimTime serialization_time(double rate) {
  const auto us = std::llround(static_cast<double>(kCellSize) * 1e6 / rate);
  return SimTime::us(us < 1 ? 1 : us);
}

class Network : public TunnelPort {
public:
  explicit Network(Engine& engine) : engine_(engine) {}

  void set_application(Application* app) { app_ = app; }
  void set_defense(DefenseHooks* d) { defense_ = d; }
  void record_egress(bool on) { record_egress_ = on; }

  HostId add_host(HostSpec spec) {
    if (!(spec.up_rate > 0.0)) throw ConfigError("host " + spec.name + ": up_rate must be > 0");
    if (spec.down_rate < 0.0) throw ConfigError("host " + spec.name + ": down_rate must be >= 0");
    Host h;
    h.egress_ser = serialization_time(spec.up_rate);
    if (spec.down_rate > 0.0) h.ingress_ser = serialization_time(spec.down_rate);
    h.spec = std::move(spec);
    hosts_.push_back(std::move(h));
    return static_cast<HostId>(hosts_.size() - 1);
  }

  void set_link_latency(HostId a, HostId b, SimTime latency) {
    check_host(a);
    check_host(b);
    if (latency <= SimTime{0}) throw ConfigError("link latency must be > 0");
    links_[key(a, b)] = latency;
  }

  SimTime link_latency(HostId a, HostId b) const {
    if (auto it = links_.find(key(a, b)); it != links_.end()) return it->second;
    return hosts_[a].spec.access_latency + hosts_[b].spec.access_latency;
  }

  CircuitId build_circuit(HostId client, std::span<const HostId> relays, HostId server) {
    if (relays.size() != 3) {
      throw ConfigError("circuit must have exactly three relays, got " + std::to_string(relays.size()));
    }
    Circuit c;
    c.id = static_cast<CircuitId>(circuits_.size());
    c.path = {client, relays[0], relays[1], relays[2], server};
    for (auto h : c.path) check_host(h);
    for (std::size_t i = 0; i < c.path.size(); ++i) {
      if (i + 1 < c.path.size() && link_latency(c.path[i], c.path[i + 1]) <= SimTime{0}) {
        throw ConfigError("circuit link latency must be > 0");
      }
    }
    c.state = CircuitState::Open;
    c.opened_at = engine_.now();
    circuits_.push_back(c);
    if (defense_) defense_->circuit_opened(c.id, c.opened_at);
    return c.id;
  }

  void close_circuit(CircuitId id, CircuitState final_state = CircuitState::Closed) {
    if (id >= circuits_.size()) return;
    auto& c = circuits_[id];
    if (!c.open()) return;
    c.state = final_state;
    if (defense_) defense_->circuit_closed(id);
  }

  /// Appends the cell to origin's egress FIFO. The arrival at the next hop is
  /// scheduled at serialization completion plus link latency.
  void send_cell(HostId origin, CircuitId id, const Cell& cell) {
    if (id >= circuits_.size()) {
      ++stats_.drops_unknown;
      return;
    }
    const auto& path = circuits_[id].path;
    for (std::uint8_t pos = 0; pos < path.size(); ++pos) {
      if (path[pos] == origin) {
        send_from(id, pos, cell);
        return;
      }
    }
    throw InvariantError("send_cell: host " + std::to_string(origin) + " is not on circuit " +
                         std::to_string(id));
  }

  /// Non-padding cell originated by the client.
  void client_send(CircuitId id, const Cell& cell) { endpoint_send(id, Endpoint::Client, cell); }

  /// Non-padding cell originated by the server.
  void server_send(CircuitId id, const Cell& cell) { send_from(id, kServerPos, cell); }

  // TunnelPort
  bool circuit_open(CircuitId id) const override { return id < circuits_.size() && circuits_[id].open(); }

  void emit_padding(CircuitId id, Endpoint at) override {
    if (!circuit_open(id)) return;
    const Cell cell(CellKind::Padding, padding_direction(at), id, engine_.now());
    send_from(id, pos_of(at), cell);
    if (at == Endpoint::Client && app_) app_->on_client_padding(id, false);
  }

  void release(CircuitId id, Endpoint at, const Cell& cell) override { send_from(id, pos_of(at), cell); }

  void handle(const Event& ev) {
    if (ev.kind == EventKind::CellArrival) {
      on_arrival(ev);
    } else if (ev.kind == EventKind::CellIngress) {
      deliver(ev.payload.cell, ev.payload.pos);
    }
  }

  /// Processes a cell that has arrived at position `pos` of its circuit.
  void deliver(const Cell& cell, std::uint8_t pos) {
    const CircuitId id = cell.circuit();
    if (id >= circuits_.size()) {
      ++stats_.drops_unknown;
      return;
    }
    if (!circuits_[id].open()) {
      ++stats_.drops_closed;
      return;
    }
    ++stats_.cells_delivered;
    const bool client_bound = cell.direction() == Direction::ClientBound;
    if (cell.is_padding()) {
      if (client_bound && pos == kClientPos) {
        notify(id, Endpoint::Client, Trigger::PaddingReceived);
        if (app_) app_->on_client_padding(id, true);
      } else if (!client_bound && pos == kMiddlePos) {
        notify(id, Endpoint::Middle, Trigger::PaddingReceived);
      } else {
        forward(id, pos, cell);
      }
      return;
    }
    if (pos == kClientPos) {
      notify(id, Endpoint::Client, Trigger::NonPaddingReceived);
      if (app_) app_->on_client_receive(id, cell);
    } else if (pos == kServerPos) {
      if (app_) app_->on_server_receive(id, cell);
    } else if (pos == kMiddlePos) {
      if (client_bound) {
        endpoint_send(id, Endpoint::Middle, cell);
      } else {
        notify(id, Endpoint::Middle, Trigger::NonPaddingReceived);
        forward(id, pos, cell);
      }
    } else {
      forward(id, pos, cell);
    }
  }

  const Host& host(HostId id) const { return hosts_.at(id); }
  std::size_t host_count() const { return hosts_.size(); }
  const Circuit& circuit(CircuitId id) const { return circuits_.at(id); }
  std::size_t circuit_count() const { return circuits_.size(); }
  const NetworkStats& stats() const { return stats_; }
  const std::vector<EgressRecord>& egress_log() const { return egress_log_; }

  /// Cells currently waiting in (or being serialized by) a host's egress pipe.
  std::size_t queue_length(HostId id) {
    auto& h = hosts_.at(id);
    purge(h);
    return h.departures.size();
  }

private:
  static std::pair<HostId, HostId> key(HostId a, HostId b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }
  static std::uint8_t pos_of(Endpoint e) { return e == Endpoint::Client ? kClientPos : kMiddlePos; }

  void check_host(HostId id) const {
    if (id >= hosts_.size()) throw ConfigError("unknown host id " + std::to_string(id));
  }

  void notify(CircuitId id, Endpoint at, Trigger t) {
    if (defense_) defense_->cell_event(id, at, t);
  }

  void endpoint_send(CircuitId id, Endpoint at, const Cell& cell) {
    if (defense_ && circuit_open(id) && defense_->hold(id, at, cell)) return;
    send_from(id, pos_of(at), cell);
    notify(id, at, Trigger::NonPaddingSent);
  }

  void forward(CircuitId id, std::uint8_t pos, const Cell& cell) { send_from(id, pos, cell); }

  void purge(Host& h) {
    const auto now = engine_.now();
    while (!h.departures.empty() && h.departures.front() <= now) h.departures.pop_front();
  }

  void send_from(CircuitId id, std::uint8_t pos, const Cell& cell) {
    if (id >= circuits_.size()) {
      ++stats_.drops_unknown;
      return;
    }
    const auto& c = circuits_[id];
    if (!c.open()) {
      ++stats_.drops_closed;
      return;
    }
    const bool client_bound = cell.direction() == Direction::ClientBound;
    if (cell.is_padding() && (client_bound ? pos > kMiddlePos : pos >= kMiddlePos)) {
      throw InvariantError("padding cell outside the client-middle tunnel");
    }
    if ((client_bound && pos == kClientPos) || (!client_bound && pos == kServerPos)) {
      throw InvariantError("cell sent past the end of its circuit");
    }
    const std::uint8_t next = client_bound ? pos - 1 : pos + 1;
    Host& h = hosts_[c.path[pos]];
    purge(h);
    if (h.spec.queue_cap && h.departures.size() >= *h.spec.queue_cap) {
      ++stats_.drops_queue_full;
      return;
    }
    const auto now = engine_.now();
    const SimTime start = h.egress_busy_until > now ? h.egress_busy_until : now;
    const SimTime depart = start + h.egress_ser;
    h.egress_busy_until = depart;
    h.departures.push_back(depart);
    ++h.cells_sent;
    if (cell.is_padding()) ++h.padding_sent;

    if (record_egress_) {
      if (pos == kClientPos && !client_bound) {
        egress_log_.push_back({now, id, Endpoint::Client, cell.kind()});
      } else if (pos == kMiddlePos && client_bound) {
        egress_log_.push_back({now, id, Endpoint::Middle, cell.kind()});
      }
    }
    const HostId dst = c.path[next];
    engine_.schedule(depart + link_latency(c.path[pos], dst), EventKind::CellArrival, dst,
                     EventPayload{cell, next, 0});
  }

  void on_arrival(const Event& ev) {
    Host& h = hosts_[ev.target];
    if (h.ingress_ser.count() == 0) {
      deliver(ev.payload.cell, ev.payload.pos);
      return;
    }
    const auto now = engine_.now();
    const SimTime start = h.ingress_busy_until > now ? h.ingress_busy_until : now;
    h.ingress_busy_until = start + h.ingress_ser;
    engine_.schedule(h.ingress_busy_until, EventKind::CellIngress, ev.target, ev.payload);
  }

  Engine& engine_;
  Application* app_ = nullptr;
  DefenseHooks* defense_ = nullptr;
  std::vector<Host> hosts_;
  std::map<std::pair<HostId, HostId>, SimTime> links_;
  std::vector<Circuit> circuits_;
  NetworkStats stats_;
  bool record_egress_ = false;
  std::vector<EgressRecord> egress_log_;
};

} // namespace padsim

#endif // PADSIM_NET_NETWORK_HPP
