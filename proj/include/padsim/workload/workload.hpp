#ifndef PADSIM_WORKLOAD_WORKLOAD_HPP
#define PADSIM_WORKLOAD_WORKLOAD_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "padsim/net/network.hpp"
#include "padsim/sim/distribution.hpp"
#include "padsim/sim/errors.hpp"
#include "padsim/sim/rng.hpp"

namespace padsim {

enum class DownloadStatus : std::uint8_t { InFlight, Success, Timeout, CircuitFailed };

inline const char* to_string(DownloadStatus s) {
  switch (s) {
    case DownloadStatus::InFlight: return "in_flight";
    case DownloadStatus::Success: return "success";
    case DownloadStatus::Timeout: return "timeout";
    case DownloadStatus::CircuitFailed: return "circuit_failed";
  }
  return "?";
}

inline std::optional<DownloadStatus> parse_status(const std::string& s) {
  for (auto st : {DownloadStatus::InFlight, DownloadStatus::Success, DownloadStatus::Timeout,
                  DownloadStatus::CircuitFailed}) {
    if (s == to_string(st)) return st;
  }
  return std::nullopt;
}

/// One content arrival at the client.
struct ProgressEntry {
  SimTime at;
  std::uint64_t bytes = 0;       // cumulative content bytes
  std::uint64_t padding_rx = 0;  // cumulative padding cells received
};

/// A non-padding cell seen at the client, for trace capture.
struct ObservedCell {
  SimTime at;
  Direction dir;
};

struct DownloadRecord {
  std::uint64_t id = 0;
  std::string client;
  std::uint64_t size = 0;
  SimTime start{0};
  std::optional<SimTime> end;
  DownloadStatus status = DownloadStatus::InFlight;
  std::vector<ProgressEntry> progress;
  std::uint64_t padding_rx = 0;
  std::uint64_t padding_tx = 0;
  std::vector<ObservedCell> observed;

  std::uint64_t content_bytes() const { return progress.empty() ? 0 : progress.back().bytes; }
  std::uint64_t padding_total() const { return padding_rx + padding_tx; }
  bool succeeded() const { return status == DownloadStatus::Success; }
};

struct WorkloadConfig {
  std::uint32_t benchmark_clients = 10;
  std::uint32_t background_clients = 0;
  std::vector<std::uint64_t> size_classes{51200, 1048576, 5242880};
  Distribution think_time = Exponential{5.0e6};  // us
  std::optional<SimTime> download_timeout = SimTime::sec(60);
  std::uint32_t window_cells = 1000;
  std::uint32_t sendme_every = 100;
  std::uint16_t cell_payload = 498;
  double background_rate = 100.0;  // content cells/s while on
  Distribution background_on = Exponential{2.0e6};
  Distribution background_off = Exponential{2.0e6};
  bool capture_traces = false;

  void validate() const {
    if (size_classes.empty()) throw ConfigError("workload.size_classes: must not be empty");
    for (std::size_t i = 0; i < size_classes.size(); ++i) {
      if (size_classes[i] == 0) {
        throw ConfigError("workload.size_classes[" + std::to_string(i) + "]: zero-byte downloads are not allowed");
      }
    }
    if (download_timeout && *download_timeout <= SimTime{0}) {
      throw ConfigError("workload.download_timeout_s: must be > 0 (or null for none)");
    }
    if (window_cells == 0) throw ConfigError("workload.window_cells: must be > 0");
    if (sendme_every == 0 || sendme_every > window_cells) {
      throw ConfigError("workload.sendme_every: must be in [1, window_cells]");
    }
    if (cell_payload == 0 || cell_payload > kCellSize) {
      throw ConfigError("workload.cell_payload_bytes: must be in [1, 512]");
    }
    if (background_clients > 0 && !(background_rate > 0.0)) {
      throw ConfigError("workload.background.rate_cells_per_s: must be > 0");
    }
    validate_distribution(think_time, "workload.think_time");
    validate_distribution(background_on, "workload.background.on_time");
    validate_distribution(background_off, "workload.background.off_time");
  }

  /// Number of content cells the server sends for a download of `size` bytes.
  std::uint64_t cells_for(std::uint64_t size) const { return (size + cell_payload - 1) / cell_payload; }

private:
  static void validate_distribution(const Distribution& d, const std::string& field) { padsim::validate(d, field); }
};

/// Hosts the workload may place circuits on.
struct WorkloadHosts {
  std::vector<HostId> guards, middles, exits, servers;
  std::vector<HostId> benchmark_clients, background_clients;
};

/// Control cell commands, carried in the payload field.
enum class ControlCommand : std::uint16_t { Request = 1, Sendme = 2 };

/// Benchmark clients performing repeated fixed-size downloads and background
/// clients producing on/off load. Servers release content through an
/// end-to-end window refilled by client acknowledgements.
class Workload : public Application {
public:
  Workload(Engine& engine, Network& net, WorkloadConfig cfg, WorkloadHosts hosts, std::uint64_t seed,
           double failure_probability, SimTime duration)
      : engine_(engine),
        net_(net),
        cfg_(std::move(cfg)),
        hosts_(std::move(hosts)),
        seed_(seed),
        p_fail_(failure_probability),
        duration_(duration) {
    cfg_.validate();
    if (!hosts_.benchmark_clients.empty() || !hosts_.background_clients.empty()) {
      if (hosts_.guards.empty() || hosts_.middles.empty() || hosts_.exits.empty() || hosts_.servers.empty()) {
        throw ConfigError("topology: clients need at least one guard, middle, exit and server");
      }
    }
    for (std::size_t i = 0; i < hosts_.benchmark_clients.size(); ++i) {
      const auto name = "bench" + std::to_string(i);
      bench_.push_back(BenchClient{hosts_.benchmark_clients[i], name, 0, std::nullopt,
                                   RngStream(seed_, "path/" + name), RngStream(seed_, "think/" + name),
                                   RngStream(seed_, "fail/" + name)});
    }
    for (std::size_t i = 0; i < hosts_.background_clients.size(); ++i) {
      const auto name = "bg" + std::to_string(i);
      bg_.push_back(BgClient{hosts_.background_clients[i], 0, false, 0, cfg_.window_cells, 0,
                             RngStream(seed_, "path/" + name), RngStream(seed_, "onoff/" + name)});
    }
    interval_ = SimTime::us(std::max<std::int64_t>(1, std::llround(1e6 / cfg_.background_rate)));
  }

  /// Schedules the first download of every benchmark client and opens the
  /// background circuits.
  void start() {
    for (std::size_t i = 0; i < bench_.size(); ++i) {
      const auto delay = draw_delay(cfg_.think_time, bench_[i].think_rng);
      engine_.schedule_in(delay, EventKind::DownloadStart, static_cast<EntityId>(i));
    }
    for (std::size_t j = 0; j < bg_.size(); ++j) {
      auto& b = bg_[j];
      b.circuit = build(b.host, b.path_rng);
      use(b.circuit).background = static_cast<std::int64_t>(j);
      engine_.schedule_in(draw_delay(cfg_.background_off, b.onoff_rng), EventKind::BackgroundToggle,
                          static_cast<EntityId>(j));
    }
  }

  void handle(const Event& ev) {
    switch (ev.kind) {
      case EventKind::DownloadStart:
        if (engine_.now() < duration_) start_download(ev.target);
        break;
      case EventKind::Timeout: on_timeout(ev.target);
        break;
      case EventKind::BackgroundToggle: on_toggle(ev.target);
        break;
      case EventKind::ServerSend: on_background_send(ev.target, ev.payload.aux);
        break;
      default: break;
    }
  }

  /// Starts the next download of benchmark client `i` on a fresh circuit.
  std::uint64_t start_download(std::size_t i) {
    auto& c = bench_.at(i);
    if (c.circuit) net_.close_circuit(*c.circuit);
    const auto size = cfg_.size_classes[c.next_size];
    c.next_size = (c.next_size + 1) % cfg_.size_classes.size();

    DownloadRecord rec;
    rec.id = records_.size();
    rec.client = c.name;
    rec.size = size;
    rec.start = engine_.now();
    records_.push_back(std::move(rec));
    const auto id = records_.size() - 1;
    states_.push_back(DownloadState{i, std::nullopt, 0, false});
    ++in_flight_;

    try {
      const auto circ = build(c.host, c.path_rng);
      c.circuit = circ;
      states_[id].circuit = circ;
      use(circ).download = static_cast<std::int64_t>(id);
    } catch (const ConfigError&) {
      finish(id, DownloadStatus::CircuitFailed);
      return id;
    }
    client_send(id, Cell(CellKind::Control, Direction::ServerBound, *states_[id].circuit, engine_.now(),
                         static_cast<std::uint16_t>(ControlCommand::Request)));
    if (cfg_.download_timeout) {
      engine_.schedule_in(*cfg_.download_timeout, EventKind::Timeout, static_cast<EntityId>(id));
    }
    return id;
  }

  /// Kills a circuit: every in-flight download on it fails with its partial
  /// progress kept.
  void fail_circuit(CircuitId c) {
    net_.close_circuit(c, CircuitState::Failed);
    if (c < uses_.size() && uses_[c].download >= 0) {
      const auto id = static_cast<std::uint64_t>(uses_[c].download);
      if (records_[id].status == DownloadStatus::InFlight) finish(id, DownloadStatus::CircuitFailed);
    }
  }

  // Application
  void on_client_receive(CircuitId c, const Cell& cell) override {
    if (cell.kind() != CellKind::Content) return;
    const auto& u = use(c);
    if (u.download < 0) {
      ++background_cells_rx_;
      if (u.background >= 0 && ++bg_[u.background].rx % cfg_.sendme_every == 0) {
        net_.client_send(c, Cell(CellKind::Control, Direction::ServerBound, c, engine_.now(),
                                 static_cast<std::uint16_t>(ControlCommand::Sendme)));
      }
      return;
    }
    const auto id = static_cast<std::uint64_t>(u.download);
    auto& rec = records_[id];
    if (rec.status != DownloadStatus::InFlight) return;
    auto& st = states_[id];
    const auto bytes = rec.content_bytes() + cell.payload();
    if (bytes > rec.size) {
      throw InvariantError("download " + std::to_string(id) + ": received " + std::to_string(bytes) +
                           " content bytes for a " + std::to_string(rec.size) + "-byte download");
    }
    if (cfg_.capture_traces) rec.observed.push_back({engine_.now(), Direction::ClientBound});
    if (bytes == rec.size && st.doomed) {
      // the circuit dies before the last cell is delivered
      fail_circuit(c);
      return;
    }
    append_progress(rec, bytes);
    ++st.cells_rx;
    if (bytes == rec.size) {
      finish(id, DownloadStatus::Success);
      return;
    }
    if (st.cells_rx % cfg_.sendme_every == 0) {
      client_send(id, Cell(CellKind::Control, Direction::ServerBound, c, engine_.now(),
                           static_cast<std::uint16_t>(ControlCommand::Sendme)));
    }
  }

  void on_server_receive(CircuitId c, const Cell& cell) override {
    if (cell.kind() != CellKind::Control) return;
    const auto& u = use(c);
    if (u.background >= 0 && cell.payload() == static_cast<std::uint16_t>(ControlCommand::Sendme)) {
      bg_[u.background].window += cfg_.sendme_every;
      return;
    }
    if (u.download < 0) return;
    if (flows_.size() <= c) flows_.resize(c + 1);
    auto& f = flows_[c];
    if (cell.payload() == static_cast<std::uint16_t>(ControlCommand::Request)) {
      f = ServerFlow{true, records_[static_cast<std::size_t>(u.download)].size, cfg_.window_cells};
    } else if (cell.payload() == static_cast<std::uint16_t>(ControlCommand::Sendme) && f.active) {
      f.window += cfg_.sendme_every;
    }
    pump(c);
  }

  void on_client_padding(CircuitId c, bool rx) override {
    if (c >= uses_.size() || uses_[c].download < 0) return;
    const auto id = static_cast<std::uint64_t>(uses_[c].download);
    auto& rec = records_[id];
    if (rec.status != DownloadStatus::InFlight) return;
    if (rx) {
      ++rec.padding_rx;
    } else {
      ++rec.padding_tx;
    }
    auto& st = states_[id];
    if (p_fail_ > 0.0 && !st.doomed && bench_[st.client].fail_rng.bernoulli(p_fail_)) st.doomed = true;
  }

  std::size_t in_flight() const { return in_flight_; }
  const std::vector<DownloadRecord>& records() const { return records_; }
  std::vector<DownloadRecord>& records() { return records_; }
  const WorkloadConfig& config() const { return cfg_; }
  std::uint64_t background_cells_received() const { return background_cells_rx_; }
  std::uint64_t background_cells_sent() const { return background_cells_tx_; }

  /// Ends every download still in flight as a timeout (used when a run is cut
  /// off with work outstanding).
  void expire_all() {
    for (std::uint64_t id = 0; id < records_.size(); ++id) {
      if (records_[id].status == DownloadStatus::InFlight) {
        if (states_[id].circuit) net_.close_circuit(*states_[id].circuit);
        finish(id, DownloadStatus::Timeout, false);
      }
    }
  }

private:
  struct BenchClient {
    HostId host;
    std::string name;
    std::size_t next_size;
    std::optional<CircuitId> circuit;
    RngStream path_rng;
    RngStream think_rng;
    RngStream fail_rng;
  };

  struct BgClient {
    HostId host;
    CircuitId circuit;
    bool on;
    std::uint64_t epoch;
    std::uint64_t window;  // cells the server may still send unacknowledged
    std::uint64_t rx;
    RngStream path_rng;
    RngStream onoff_rng;
  };

  struct DownloadState {
    std::size_t client;
    std::optional<CircuitId> circuit;
    std::uint64_t cells_rx;
    bool doomed;
  };

  struct CircuitUse {
    std::int64_t download = -1;
    std::int64_t background = -1;
  };

  struct ServerFlow {
    bool active = false;
    std::uint64_t remaining = 0;
    std::uint64_t window = 0;
  };

  static SimTime draw_delay(const Distribution& d, RngStream& rng) {
    auto v = draw(rng, d);
    return v ? SimTime::us(*v) : SimTime::infinite();
  }

  CircuitUse& use(CircuitId c) {
    if (uses_.size() <= c) uses_.resize(c + 1);
    return uses_[c];
  }

  CircuitId build(HostId client, RngStream& rng) {
    auto pick = [&](const std::vector<HostId>& v) { return v[rng.next_below(v.size())]; };
    const std::array<HostId, 3> relays{pick(hosts_.guards), pick(hosts_.middles), pick(hosts_.exits)};
    const HostId server = pick(hosts_.servers);
    const auto c = net_.build_circuit(client, relays, server);
    use(c);
    return c;
  }

  void client_send(std::uint64_t id, const Cell& cell) {
    if (cfg_.capture_traces) records_[id].observed.push_back({engine_.now(), Direction::ServerBound});
    net_.client_send(cell.circuit(), cell);
  }

  void pump(CircuitId c) {
    auto& f = flows_[c];
    while (f.active && f.window > 0 && f.remaining > 0) {
      const auto payload = static_cast<std::uint16_t>(std::min<std::uint64_t>(cfg_.cell_payload, f.remaining));
      f.remaining -= payload;
      --f.window;
      net_.server_send(c, Cell(CellKind::Content, Direction::ClientBound, c, engine_.now(), payload));
    }
    if (f.remaining == 0) f.active = false;
  }

  void append_progress(DownloadRecord& rec, std::uint64_t bytes) {
    const auto now = engine_.now();
    if (!rec.progress.empty() && rec.progress.back().at == now) {
      rec.progress.back().bytes = bytes;
      rec.progress.back().padding_rx = rec.padding_rx;
    } else {
      rec.progress.push_back({now, bytes, rec.padding_rx});
    }
  }

  void finish(std::uint64_t id, DownloadStatus status, bool schedule_next = true) {
    auto& rec = records_[id];
    if (rec.status != DownloadStatus::InFlight) return;
    rec.status = status;
    if (status == DownloadStatus::Success) rec.end = engine_.now();
    --in_flight_;
    auto& st = states_[id];
    if (status != DownloadStatus::Success && st.circuit) {
      net_.close_circuit(*st.circuit, status == DownloadStatus::CircuitFailed ? CircuitState::Failed
                                                                               : CircuitState::Closed);
    }
    if (schedule_next && engine_.now() < duration_) {
      auto& c = bench_[st.client];
      engine_.schedule_in(draw_delay(cfg_.think_time, c.think_rng), EventKind::DownloadStart,
                          static_cast<EntityId>(st.client));
    }
  }

  void on_timeout(std::uint64_t id) {
    if (id >= records_.size() || records_[id].status != DownloadStatus::InFlight) return;
    finish(id, DownloadStatus::Timeout);
  }

  void on_toggle(std::size_t j) {
    auto& b = bg_.at(j);
    if (engine_.now() >= duration_) {
      b.on = false;
      return;
    }
    b.on = !b.on;
    if (b.on) {
      ++b.epoch;
      engine_.schedule_in(SimTime{0}, EventKind::ServerSend, static_cast<EntityId>(j), EventPayload{{}, 0, b.epoch});
      engine_.schedule_in(draw_delay(cfg_.background_on, b.onoff_rng), EventKind::BackgroundToggle,
                          static_cast<EntityId>(j));
    } else {
      engine_.schedule_in(draw_delay(cfg_.background_off, b.onoff_rng), EventKind::BackgroundToggle,
                          static_cast<EntityId>(j));
    }
  }

  void on_background_send(std::size_t j, std::uint64_t epoch) {
    auto& b = bg_.at(j);
    if (!b.on || b.epoch != epoch || engine_.now() >= duration_) return;
    // a closed window skips the tick: the source is throttled, not backlogged
    if (b.window > 0) {
      --b.window;
      ++background_cells_tx_;
      net_.server_send(b.circuit,
                       Cell(CellKind::Content, Direction::ClientBound, b.circuit, engine_.now(), cfg_.cell_payload));
    }
    engine_.schedule_in(interval_, EventKind::ServerSend, static_cast<EntityId>(j), EventPayload{{}, 0, epoch});
  }

  Engine& engine_;
  Network& net_;
  WorkloadConfig cfg_;
  WorkloadHosts hosts_;
  std::uint64_t seed_;
  double p_fail_;
  SimTime duration_;
  SimTime interval_{1};
  std::vector<BenchClient> bench_;
  std::vector<BgClient> bg_;
  std::vector<DownloadRecord> records_;
  std::vector<DownloadState> states_;
  std::vector<CircuitUse> uses_;
  std::vector<ServerFlow> flows_;
  std::size_t in_flight_ = 0;
  std::uint64_t background_cells_rx_ = 0;
  std::uint64_t background_cells_tx_ = 0;
};

} // namespace padsim

#endif // PADSIM_WORKLOAD_WORKLOAD_HPP
