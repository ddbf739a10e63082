#include <gtest/gtest.h>

#include "padsim/trace/trace.hpp"
#include "padsim/workload/workload.hpp"

using namespace padsim;

namespace {

CellTrace trace_of(std::vector<std::int64_t> ms, Direction dir = Direction::ClientBound) {
  CellTrace t;
  t.source = "test";
  for (auto m : ms) t.cells.push_back({SimTime::ms(m), dir, CellKind::Content});
  return t;
}

DefenseSpec defense(const std::string& name, json params = json::object()) {
  DefenseConfig c;
  c.name = name;
  c.params = std::move(params);
  return make_defense(c);
}

std::vector<SimTime> content_times(const DefendedTrace& d) {
  std::vector<SimTime> out;
  for (const auto& c : d.cells) {
    if (c.kind == CellKind::Content) out.push_back(c.at);
  }
  return out;
}

} // namespace

TEST(Trace, BurstExtendOnEmptyTraceHasNoContent) {
  const auto d = apply_defense_to_trace(CellTrace{}, defense("burst_extend"), 1);
  EXPECT_EQ(d.count(CellKind::Content), 0u);
}

TEST(Trace, AdaptiveGapNeverMovesContent) {
  CellTrace t;
  std::int64_t at = 0;
  for (int i = 0; i < 200; ++i) {
    at += (i % 7) * 900 + (i % 3 ? 0 : 4000);
    t.cells.push_back({SimTime::us(at), i % 5 ? Direction::ClientBound : Direction::ServerBound,
                       CellKind::Content});
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = apply_defense_to_trace(t, defense("adaptive_gap", {{"tokens", {8}}, {"infinity_tokens", 2}}), seed);
    std::vector<SimTime> want;
    for (const auto& c : t.cells) want.push_back(c.at);
    EXPECT_EQ(content_times(d), want);
    EXPECT_GT(d.count(CellKind::Padding), 0u);
    std::int64_t next = 0;
    for (const auto& c : d.cells) {
      if (c.kind == CellKind::Content) EXPECT_EQ(c.original, next++);
    }
    EXPECT_EQ(trace_overheads(t, d).latency_pct, 0.0);
  }
}

TEST(Trace, BufloReslotsContent) {
  const auto d = apply_defense_to_trace(trace_of({0, 0, 0}), defense("buflo", {{"slot_us", 10000}, {"endpoints", {"middle"}}}), 1);
  EXPECT_EQ(content_times(d), (std::vector<SimTime>{SimTime::ms(10), SimTime::ms(20), SimTime::ms(30)}));
}

TEST(Trace, BufloLatencyOverheadHandExample) {
  const auto orig = trace_of({0, 5, 25});
  const auto d = apply_defense_to_trace(orig, defense("buflo", {{"slot_us", 10000}, {"endpoints", {"middle"}}}), 1);
  EXPECT_EQ(content_times(d), (std::vector<SimTime>{SimTime::ms(10), SimTime::ms(20), SimTime::ms(30)}));
  EXPECT_DOUBLE_EQ(*trace_overheads(orig, d).latency_pct, 20.0);
}

TEST(Trace, BandwidthOverheadArithmetic) {
  CellTrace orig = trace_of(std::vector<std::int64_t>(100, 1));
  DefendedTrace d;
  for (int i = 0; i < 100; ++i) d.cells.push_back({SimTime::ms(1), Direction::ClientBound, CellKind::Content, i});
  for (int i = 0; i < 83; ++i) d.cells.push_back({SimTime::ms(2), Direction::ClientBound, CellKind::Padding, -1});
  const auto o = trace_overheads(orig, d);
  EXPECT_EQ(csv::fixed(*o.bandwidth_pct, 1), "83.0");
  EXPECT_EQ(o.latency_pct, 0.0);
}

TEST(Trace, EmptyOriginalIsAbsent) {
  const auto o = trace_overheads(CellTrace{}, DefendedTrace{});
  EXPECT_FALSE(o.bandwidth_pct);
  EXPECT_FALSE(o.latency_pct);
}

TEST(Trace, DecreasingTimestampsRejected) {
  EXPECT_THROW(apply_defense_to_trace(trace_of({5, 1}), defense("none"), 1), ConfigError);
}

namespace {

struct Emission {
  SimTime at;
  CircuitId circuit;
  Endpoint endpoint;
  bool operator==(const Emission&) const = default;
};

/// Forwards to a real port and records every padding emission.
struct RecordingPort : TunnelPort {
  TunnelPort* inner = nullptr;
  Engine* engine = nullptr;
  std::vector<Emission> padding;

  bool circuit_open(CircuitId c) const override { return inner ? inner->circuit_open(c) : true; }
  void emit_padding(CircuitId c, Endpoint at) override {
    padding.push_back({engine->now(), c, at});
    if (inner) inner->emit_padding(c, at);
  }
  void release(CircuitId c, Endpoint at, const Cell& cell) override {
    if (inner) inner->release(c, at, cell);
  }
};

struct HookCall {
  SimTime at;
  int op;  // 0 open, 1 close, 2 cell event
  CircuitId circuit;
  Endpoint endpoint;
  Trigger trigger;
};

/// Records the hook calls the network makes into the defense layer.
struct RecordingHooks : DefenseHooks {
  DefenseRuntime* inner = nullptr;
  Engine* engine = nullptr;
  std::vector<HookCall> calls;

  void circuit_opened(CircuitId c, SimTime at) override {
    calls.push_back({at, 0, c, Endpoint::Client, Trigger::NonPaddingSent});
    inner->circuit_opened(c, at);
  }
  void circuit_closed(CircuitId c) override {
    calls.push_back({engine->now(), 1, c, Endpoint::Client, Trigger::NonPaddingSent});
    inner->circuit_closed(c);
  }
  void cell_event(CircuitId c, Endpoint at, Trigger t) override {
    calls.push_back({engine->now(), 2, c, at, t});
    inner->cell_event(c, at, t);
  }
  bool hold(CircuitId c, Endpoint at, const Cell& cell) override { return inner->hold(c, at, cell); }
  void handle(const Event& ev) override { inner->handle(ev); }
};

} // namespace

TEST(Trace, NetworkAndReplayMakeIdenticalPaddingDecisions) {
  for (const auto& spec : {defense("burst_extend", {{"endpoints", {"client", "middle"}}}),
                           defense("adaptive_gap", {{"tokens", {6}}, {"infinity_tokens", 4}})}) {
    Engine engine;
    Network net(engine);
    WorkloadHosts wh;
    auto add = [&](const std::string& name, Role role, double rate) {
      HostSpec h;
      h.name = name;
      h.role = role;
      h.up_rate = rate;
      return net.add_host(h);
    };
    wh.guards = {add("guard", Role::Guard, 200000)};
    wh.middles = {add("middle", Role::Middle, 400000)};
    wh.exits = {add("exit", Role::Exit, 400000)};
    wh.servers = {add("server", Role::Server, 1000000)};
    wh.benchmark_clients = {add("bench0", Role::Client, 1000000), add("bench1", Role::Client, 1000000)};

    RecordingPort port;
    port.inner = &net;
    port.engine = &engine;
    DefenseRuntime runtime(spec, engine, port, 42);
    RecordingHooks hooks;
    hooks.inner = &runtime;
    hooks.engine = &engine;
    net.set_defense(&hooks);
    WorkloadConfig cfg;
    cfg.size_classes = {51200, 204800};
    cfg.think_time = Exponential{300000.0};
    cfg.download_timeout.reset();
    Workload work(engine, net, cfg, wh, 42, 0.0, SimTime::sec(5));
    net.set_application(&work);
    engine.set_dispatcher([&](const Event& ev) {
      if (ev.kind == EventKind::CellArrival || ev.kind == EventKind::CellIngress) {
        net.handle(ev);
      } else if (ev.kind == EventKind::PaddingTimer || ev.kind == EventKind::SlotTimer) {
        hooks.handle(ev);
      } else {
        work.handle(ev);
      }
    });
    work.start();
    engine.run_until(SimTime::sec(30));
    ASSERT_GT(port.padding.size(), 20u) << spec.name;

    // replay the same hook sequence, at the same times, with no network at all
    Engine replay;
    RecordingPort sink;
    sink.engine = &replay;
    DefenseRuntime rt(spec, replay, sink, 42);
    const auto& calls = hooks.calls;
    replay.set_dispatcher([&](const Event& ev) {
      if (ev.kind != EventKind::Generic) {
        rt.handle(ev);
        return;
      }
      const auto& h = calls[ev.target];
      if (h.op == 0) rt.circuit_opened(h.circuit, h.at);
      if (h.op == 1) rt.circuit_closed(h.circuit);
      if (h.op == 2) rt.cell_event(h.circuit, h.endpoint, h.trigger);
      if (ev.target + 1 < calls.size()) {
        replay.schedule(calls[ev.target + 1].at, EventKind::Generic, static_cast<EntityId>(ev.target + 1));
      }
    });
    replay.schedule(calls.front().at, EventKind::Generic, 0);
    replay.run_until(SimTime::sec(30));
    EXPECT_EQ(sink.padding, port.padding) << spec.name;
  }
}
