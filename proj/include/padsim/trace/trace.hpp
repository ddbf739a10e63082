#ifndef PADSIM_TRACE_TRACE_HPP
#define PADSIM_TRACE_TRACE_HPP

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "padsim/defense/runtime.hpp"
#include "padsim/metrics/csv.hpp"

namespace padsim {

struct TraceCell {
  SimTime at;
  Direction dir = Direction::ClientBound;
  CellKind kind = CellKind::Content;
};

/// Client-side view of one page load: content cells only, timestamps
/// non-decreasing.
struct CellTrace {
  std::string source;
  std::vector<TraceCell> cells;

  void validate() const {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].kind != CellKind::Content) {
        throw ConfigError(source + ": row " + std::to_string(i + 2) + ": input traces hold content cells only");
      }
      if (cells[i].at < SimTime{0}) throw ConfigError(source + ": row " + std::to_string(i + 2) + ": negative time");
      if (i && cells[i].at < cells[i - 1].at) {
        throw ConfigError(source + ": row " + std::to_string(i + 2) + ": timestamps must be non-decreasing");
      }
    }
  }
};

struct DefendedCell {
  SimTime at;
  Direction dir;
  CellKind kind;
  std::int64_t original = -1;  // index into the input trace, -1 for padding
};

struct DefendedTrace {
  std::vector<DefendedCell> cells;

  std::size_t count(CellKind k) const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [&](auto& c) { return c.kind == k; }));
  }
};

/// Zero-latency, infinite-bandwidth tunnel that replays a trace through the
/// same machine and slot-driver code the network simulator uses.
class TraceWorld : public TunnelPort {
public:
  static constexpr CircuitId kCircuit = 0;

  TraceWorld(const DefenseSpec& spec, std::uint64_t seed) : runtime_(spec, engine_, *this, seed) {
    engine_.set_dispatcher([this](const Event& ev) { dispatch(ev); });
  }

  DefendedTrace run(const CellTrace& trace) {
    trace.validate();
    trace_ = &trace;
    open_ = true;
    runtime_.circuit_opened(kCircuit, SimTime{0});
    for (std::size_t i = 0; i < trace.cells.size(); ++i) {
      engine_.schedule(trace.cells[i].at, EventKind::Generic, static_cast<EntityId>(i));
    }
    const SimTime last = trace.cells.empty() ? SimTime{0} : trace.cells.back().at;
    SimTime tail = SimTime::sec(10);
    if (const auto& b = runtime_.spec().buflo) {
      tail = std::max(tail, b->min_duration) + b->slot * static_cast<std::int64_t>(trace.cells.size() + 2);
    }
    engine_.run_until(last + tail);
    open_ = false;
    runtime_.circuit_closed(kCircuit);
    std::stable_sort(out_.cells.begin(), out_.cells.end(), [](auto& a, auto& b) { return a.at < b.at; });
    return std::move(out_);
  }

  // TunnelPort
  bool circuit_open(CircuitId) const override { return open_; }

  void emit_padding(CircuitId, Endpoint at) override {
    out_.cells.push_back({engine_.now(), padding_direction(at), CellKind::Padding, -1});
    runtime_.cell_event(kCircuit, other(at), Trigger::PaddingReceived);
  }

  void release(CircuitId, Endpoint at, const Cell& cell) override { sent(at, cell); }

private:
  static Endpoint other(Endpoint e) { return e == Endpoint::Client ? Endpoint::Middle : Endpoint::Client; }
  static Endpoint sender(Direction d) { return d == Direction::ServerBound ? Endpoint::Client : Endpoint::Middle; }

  void dispatch(const Event& ev) {
    if (ev.kind != EventKind::Generic) {
      runtime_.handle(ev);
      return;
    }
    const auto& tc = trace_->cells[ev.target];
    const Cell cell(CellKind::Content, tc.dir, kCircuit, engine_.now());
    const auto at = sender(tc.dir);
    if (runtime_.hold(kCircuit, at, cell)) {
      held_.push_back(ev.target);
      return;
    }
    emit(at, tc.dir, ev.target);
  }

  void sent(Endpoint at, const Cell& cell) {
    // slot drivers release held cells in FIFO order per endpoint
    auto it = std::find_if(held_.begin(), held_.end(),
                           [&](std::uint32_t i) { return trace_->cells[i].dir == cell.direction(); });
    if (it == held_.end()) throw InvariantError("trace replay: released a cell that was never held");
    const auto idx = *it;
    held_.erase(it);
    emit(at, cell.direction(), idx);
  }

  void emit(Endpoint at, Direction dir, std::uint32_t idx) {
    out_.cells.push_back({engine_.now(), dir, CellKind::Content, static_cast<std::int64_t>(idx)});
    runtime_.cell_event(kCircuit, at, Trigger::NonPaddingSent);
    runtime_.cell_event(kCircuit, other(at), Trigger::NonPaddingReceived);
  }

  Engine engine_;
  DefenseRuntime runtime_;
  const CellTrace* trace_ = nullptr;
  bool open_ = false;
  DefendedTrace out_;
  std::vector<std::uint32_t> held_;
};

inline DefendedTrace apply_defense_to_trace(const CellTrace& trace, const DefenseSpec& spec, std::uint64_t seed) {
  TraceWorld w(spec, seed);
  return w.run(trace);
}

struct TraceOverheads {
  std::optional<double> bandwidth_pct;
  std::optional<double> latency_pct;
  std::size_t content = 0;
  std::size_t padding = 0;
};

/// Bandwidth: padding cells over content cells. Latency: change in the time
/// of the last content cell relative to the original.
inline TraceOverheads trace_overheads(const CellTrace& orig, const DefendedTrace& def) {
  TraceOverheads o;
  o.content = def.count(CellKind::Content);
  o.padding = def.count(CellKind::Padding);
  if (orig.cells.empty()) return o;
  o.bandwidth_pct = 100.0 * static_cast<double>(o.padding) / static_cast<double>(orig.cells.size());
  SimTime last_def{0};
  for (const auto& c : def.cells) {
    if (c.kind == CellKind::Content) last_def = std::max(last_def, c.at);
  }
  const auto last_orig = orig.cells.back().at;
  if (last_orig > SimTime{0}) {
    o.latency_pct = 100.0 * static_cast<double>((last_def - last_orig).count()) / static_cast<double>(last_orig.count());
  }
  return o;
}

inline const char* direction_code(Direction d) { return d == Direction::ClientBound ? "in" : "out"; }

inline void write_trace(const std::string& path, const std::vector<TraceCell>& cells) {
  csv::Writer w(path);
  w.row({"timestamp_us", "direction", "kind"});
  for (const auto& c : cells) w.row({std::to_string(c.at.count()), direction_code(c.dir), to_string(c.kind)});
  w.close();
}

inline void write_trace(const std::string& path, const DefendedTrace& t) {
  std::vector<TraceCell> cells;
  for (const auto& c : t.cells) cells.push_back({c.at, c.dir, c.kind});
  write_trace(path, cells);
}

inline CellTrace read_trace(const std::string& path) {
  const auto t = csv::read(path);
  if (t.header != std::vector<std::string>{"timestamp_us", "direction", "kind"}) {
    throw ConfigError(path + ": header must be timestamp_us,direction,kind");
  }
  CellTrace out;
  out.source = path;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto where = path + ":" + std::to_string(i + 2);
    TraceCell c;
    c.at = SimTime::us(csv::to_int(t.rows[i][0], where));
    const auto& d = t.rows[i][1];
    if (d == "in") {
      c.dir = Direction::ClientBound;
    } else if (d == "out") {
      c.dir = Direction::ServerBound;
    } else {
      throw ConfigError(where + ": direction must be 'in' or 'out'");
    }
    const auto& k = t.rows[i][2];
    if (k == "content") {
      c.kind = CellKind::Content;
    } else if (k == "padding") {
      c.kind = CellKind::Padding;
    } else {
      throw ConfigError(where + ": kind must be 'content' or 'padding'");
    }
    out.cells.push_back(c);
  }
  out.validate();
  return out;
}

} // namespace padsim

#endif // PADSIM_TRACE_TRACE_HPP
