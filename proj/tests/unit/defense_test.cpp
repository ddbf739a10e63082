#include <gtest/gtest.h>

#include <set>

#include "padsim/defense/runtime.hpp"

using namespace padsim;

namespace {

/// Tunnel stand-in recording what the defense emits.
struct FakePort : TunnelPort {
  Engine* engine = nullptr;
  bool open = true;
  std::vector<std::pair<SimTime, Endpoint>> padding;
  std::vector<std::pair<SimTime, Cell>> released;

  bool circuit_open(CircuitId) const override { return open; }
  void emit_padding(CircuitId, Endpoint at) override { padding.emplace_back(engine->now(), at); }
  void release(CircuitId, Endpoint, const Cell& c) override { released.emplace_back(engine->now(), c); }
};

struct Bench {
  Engine engine;
  FakePort port;
  Bench() { port.engine = &engine; }
};

MachineSpec burst_on_receive(std::optional<std::uint64_t> budget = std::nullopt) {
  MachineSpec m;
  m.name = "t";
  m.endpoint = Endpoint::Middle;
  m.allowed_on = Direction::ClientBound;
  m.start_state = "idle";
  m.budget = budget;
  m.states = {StateSpec{"idle", std::nullopt, std::nullopt, {{Trigger::NonPaddingReceived, "burst"}}},
              StateSpec{"burst", Uniform{10000, 10000}, std::nullopt, {{Trigger::NonPaddingSent, "idle"}}}};
  return m;
}

std::vector<SimTime> times(const std::vector<std::pair<SimTime, Endpoint>>& v) {
  std::vector<SimTime> out;
  for (auto& [t, e] : v) out.push_back(t);
  return out;
}

} // namespace

TEST(Machine, TransitionSchedulesTimerAtSampledDelay) {
  Bench b;
  auto spec = std::make_shared<const CompiledMachine>(burst_on_receive());
  MachineInstance m(spec, 0, 0, b.engine, b.port, RngStream(1, "m"));
  b.engine.set_dispatcher([&](const Event& ev) {
    if (ev.kind == EventKind::PaddingTimer) m.on_timer(ev.seq);
  });
  m.start();
  EXPECT_FALSE(m.timer_pending());
  m.on_event(Trigger::NonPaddingReceived);
  EXPECT_EQ(m.state_id(), "burst");
  EXPECT_TRUE(m.timer_pending());
  b.engine.run_until(SimTime::ms(10));
  ASSERT_EQ(b.port.padding.size(), 1u);
  EXPECT_EQ(b.port.padding[0].first, SimTime::ms(10));
  EXPECT_EQ(b.port.padding[0].second, Endpoint::Middle);
}

TEST(Machine, LaterCellEventPreemptsTimer) {
  Bench b;
  auto spec = std::make_shared<const CompiledMachine>(burst_on_receive());
  MachineInstance m(spec, 0, 0, b.engine, b.port, RngStream(1, "m"));
  b.engine.set_dispatcher([&](const Event& ev) {
    if (ev.kind == EventKind::PaddingTimer) m.on_timer(ev.seq);
    if (ev.kind == EventKind::Generic) m.on_event(Trigger::NonPaddingSent);
  });
  m.start();
  m.on_event(Trigger::NonPaddingReceived);
  b.engine.schedule(SimTime::ms(5), EventKind::Generic, 0);
  b.engine.run_until(SimTime::sec(1));
  EXPECT_TRUE(b.port.padding.empty());
  EXPECT_EQ(m.state_id(), "idle");
}

TEST(Machine, UndefinedTriggerIsNoOp) {
  Bench b;
  auto spec = std::make_shared<const CompiledMachine>(burst_on_receive());
  MachineInstance m(spec, 0, 0, b.engine, b.port, RngStream(1, "m"));
  m.start();
  m.on_event(Trigger::NonPaddingReceived);
  const auto pending = b.engine.pending();
  m.on_event(Trigger::PaddingReceived);
  EXPECT_EQ(m.state_id(), "burst");
  EXPECT_EQ(b.engine.pending(), pending);
  EXPECT_TRUE(m.timer_pending());
}

TEST(Machine, ZeroBudgetNeverSchedules) {
  Bench b;
  auto spec = std::make_shared<const CompiledMachine>(burst_on_receive(0));
  MachineInstance m(spec, 0, 0, b.engine, b.port, RngStream(1, "m"));
  m.start();
  for (int i = 0; i < 5; ++i) m.on_event(Trigger::NonPaddingReceived);
  EXPECT_FALSE(m.timer_pending());
  EXPECT_TRUE(b.engine.idle());
}

TEST(Machine, BudgetCapsTotalPadding) {
  Bench b;
  MachineSpec s = burst_on_receive(3);
  s.states[1].transitions = {{Trigger::NonPaddingSent, "idle"}};
  auto spec = std::make_shared<const CompiledMachine>(s);
  MachineInstance m(spec, 0, 0, b.engine, b.port, RngStream(1, "m"));
  b.engine.set_dispatcher([&](const Event& ev) {
    if (ev.kind == EventKind::PaddingTimer) m.on_timer(ev.seq);
  });
  m.start();
  m.on_event(Trigger::NonPaddingReceived);
  b.engine.run_until(SimTime::sec(10));
  EXPECT_EQ(b.port.padding.size(), 3u);
  EXPECT_EQ(m.budget_left(), std::optional<std::uint64_t>(0));
}

TEST(Machine, QuotaReachedTakesLengthExceeded) {
  Bench b;
  MachineSpec s = burst_on_receive();
  s.states[1].length = Uniform{3, 3};
  s.states[1].transitions[Trigger::LengthExceeded] = "idle";
  auto spec = std::make_shared<const CompiledMachine>(s);
  MachineInstance m(spec, 0, 0, b.engine, b.port, RngStream(1, "m"));
  b.engine.set_dispatcher([&](const Event& ev) {
    if (ev.kind == EventKind::PaddingTimer) m.on_timer(ev.seq);
  });
  m.start();
  m.on_event(Trigger::NonPaddingReceived);
  b.engine.run_until(SimTime::sec(1));
  EXPECT_EQ(times(b.port.padding), (std::vector<SimTime>{SimTime::ms(10), SimTime::ms(20), SimTime::ms(30)}));
  EXPECT_EQ(m.state_id(), "idle");
}

TEST(Machine, ClosedCircuitDiscardsTimer) {
  Bench b;
  auto spec = std::make_shared<const CompiledMachine>(burst_on_receive());
  MachineInstance m(spec, 0, 0, b.engine, b.port, RngStream(1, "m"));
  b.engine.set_dispatcher([&](const Event& ev) {
    if (ev.kind == EventKind::PaddingTimer) m.on_timer(ev.seq);
  });
  m.start();
  m.on_event(Trigger::NonPaddingReceived);
  b.port.open = false;
  b.engine.run_until(SimTime::sec(1));
  EXPECT_TRUE(b.port.padding.empty());
}

TEST(Machine, SpecValidation) {
  MachineSpec s = burst_on_receive();
  s.start_state = "nope";
  EXPECT_THROW(CompiledMachine{s}, ConfigError);
  s = burst_on_receive();
  s.states[0].transitions[Trigger::PaddingSent] = "ghost";
  EXPECT_THROW(CompiledMachine{s}, ConfigError);
  s = burst_on_receive();
  s.allowed_on = Direction::ServerBound;  // middle may only pad toward the client
  EXPECT_THROW(CompiledMachine{s}, ConfigError);
}

TEST(Machine, AtMostOneTimerPending) {
  Bench b;
  auto spec = std::make_shared<const CompiledMachine>(burst_on_receive());
  MachineInstance m(spec, 0, 0, b.engine, b.port, RngStream(1, "m"));
  m.start();
  for (int i = 0; i < 10; ++i) m.on_event(Trigger::NonPaddingReceived);
  EXPECT_EQ(b.engine.pending(), 1u);
}

// burst_extend on a five-cell client-bound burst. Expected padding times were
// produced by tests/oracle/rng_reference.py (burst_extend_trace).
TEST(Families, BurstExtendAppendsGeometricTail) {
  struct Case {
    std::uint64_t seed;
    std::vector<std::int64_t> pads_us;
  };
  for (const auto& c : {Case{2, {24000, 24304, 24563, 25358, 25784}}, Case{7, {24000, 24412}}, Case{1, {24000}}}) {
    Bench b;
    DefenseConfig cfg;
    cfg.name = "burst_extend";
    cfg.params = {{"p_extend", 0.5}, {"max_extra", 10}};
    DefenseRuntime rt(make_defense(cfg), b.engine, b.port, c.seed);
    b.engine.set_dispatcher([&](const Event& ev) {
      if (ev.kind == EventKind::Generic) rt.cell_event(0, Endpoint::Middle, Trigger::NonPaddingSent);
      rt.handle(ev);
    });
    rt.circuit_opened(0, SimTime{0});
    ASSERT_EQ(rt.machine_count(), 1u);
    EXPECT_EQ(rt.machine(0, Endpoint::Client), nullptr);
    for (int i = 0; i < 5; ++i) b.engine.schedule(SimTime::ms(i), EventKind::Generic, 0);
    b.engine.run_until(SimTime::sec(5));
    std::vector<SimTime> want;
    for (auto us : c.pads_us) want.push_back(SimTime::us(us));
    EXPECT_EQ(times(b.port.padding), want) << "seed " << c.seed;
  }
}

TEST(Families, AdaptiveGapInfinityBinEmitsNothing) {
  Bench b;
  DefenseConfig cfg;
  cfg.name = "adaptive_gap";
  cfg.params = {{"tokens", {0}}, {"infinity_tokens", 10}};
  DefenseRuntime rt(make_defense(cfg), b.engine, b.port, 3);
  b.engine.set_dispatcher([&](const Event& ev) { rt.handle(ev); });
  rt.circuit_opened(0, SimTime{0});
  EXPECT_EQ(rt.machine_count(), 2u);
  for (int i = 0; i < 50; ++i) {
    rt.cell_event(0, Endpoint::Client, Trigger::NonPaddingSent);
    rt.cell_event(0, Endpoint::Middle, Trigger::NonPaddingSent);
  }
  b.engine.run_until(SimTime::sec(10));
  EXPECT_TRUE(b.port.padding.empty());
  EXPECT_EQ(rt.machine(0, Endpoint::Middle)->state_id(), "idle");
}

TEST(Families, AdaptiveGapAllFiniteFillsEveryGap) {
  Bench b;
  DefenseConfig cfg;
  cfg.name = "adaptive_gap";
  cfg.params = {{"edges_us", {0, 1}}, {"tokens", {5}}, {"infinity_tokens", 0}, {"endpoints", {"middle"}}};
  DefenseRuntime rt(make_defense(cfg), b.engine, b.port, 3);
  b.engine.set_dispatcher([&](const Event& ev) {
    if (ev.kind == EventKind::Generic) rt.cell_event(0, Endpoint::Middle, Trigger::NonPaddingSent);
    rt.handle(ev);
  });
  rt.circuit_opened(0, SimTime{0});
  for (int i = 0; i < 4; ++i) b.engine.schedule(SimTime::ms(10 * i), EventKind::Generic, 0);
  b.engine.run_until(SimTime::sec(1));
  EXPECT_EQ(times(b.port.padding),
            (std::vector<SimTime>{SimTime::ms(0), SimTime::ms(10), SimTime::ms(20), SimTime::ms(30)}));
}

TEST(Families, NoneAttachesNothing) {
  Bench b;
  DefenseRuntime rt(make_defense(DefenseConfig{}), b.engine, b.port, 1);
  rt.circuit_opened(0, SimTime{0});
  EXPECT_EQ(rt.machine_count(), 0u);
  EXPECT_FALSE(rt.hold(0, Endpoint::Client, Cell()));
  EXPECT_TRUE(b.engine.idle());
}

TEST(Families, InvalidConfigurations) {
  DefenseConfig c;
  c.name = "reb";
  EXPECT_THROW(make_defense(c), ConfigError);
  c.name = "burst_extend";
  c.params = {{"p_extend", 0.0}};
  EXPECT_THROW(make_defense(c), ConfigError);
  c.name = "adaptive_gap";
  c.params = {{"tokens", {0}}, {"infinity_tokens", 0}};
  EXPECT_THROW(make_defense(c), ConfigError);
  c.name = "buflo";
  c.params = {{"slot_us", 0}};
  EXPECT_THROW(make_defense(c), ConfigError);
  c.name = "none";
  c.params = json::object();
  c.failure_probability = 1.5;
  EXPECT_THROW(make_defense(c), ConfigError);
  c.failure_probability = 0;
  c.label = "a,b";
  EXPECT_THROW(make_defense(c), ConfigError);
}

TEST(Families, CustomMachineFromJson) {
  const auto j = json::parse(R"({
    "machines": [{
      "name": "m", "endpoint": "client", "start_state": "s",
      "states": [{"id": "s", "iat": {"type": "uniform", "low": 5, "high": 5},
                  "length": {"type": "uniform", "low": 2, "high": 2},
                  "transitions": {"LengthExceeded": "s"}}]
    }]})");
  DefenseConfig c;
  c.name = "custom";
  c.params = j;
  const auto spec = make_defense(c);
  ASSERT_EQ(spec.machines.size(), 1u);
  EXPECT_EQ(spec.machines[0]->spec().endpoint, Endpoint::Client);
  EXPECT_EQ(to_json(spec.machines[0]->spec())["states"][0]["transitions"]["LengthExceeded"], "s");
}

TEST(Buflo, SlotWalkDelaysQueuedContent) {
  Bench b;
  BufloConfig cfg;
  cfg.slot = SimTime::ms(10);
  cfg.min_duration = SimTime::ms(100);
  BufloDriver d(b.engine, b.port, 0, Endpoint::Middle, cfg, SimTime{0}, 0);
  b.engine.set_dispatcher([&](const Event& ev) { d.on_slot(ev.seq); });
  for (std::uint16_t i = 1; i <= 3; ++i) d.hold(Cell(CellKind::Content, Direction::ClientBound, 0, SimTime{0}, i));
  b.engine.run_until(SimTime::sec(1));
  ASSERT_EQ(b.port.released.size(), 3u);
  EXPECT_EQ(b.port.released[0].first, SimTime::ms(10));
  EXPECT_EQ(b.port.released[1].first, SimTime::ms(20));
  EXPECT_EQ(b.port.released[2].first, SimTime::ms(30));
  EXPECT_EQ(b.port.released[2].second.payload(), 3);
  // padding from 40 ms until min_duration has elapsed
  ASSERT_FALSE(b.port.padding.empty());
  EXPECT_EQ(b.port.padding.front().first, SimTime::ms(40));
  EXPECT_EQ(b.port.padding.back().first, SimTime::ms(90));
  EXPECT_FALSE(d.active());
}

TEST(Buflo, TwoCellsInOneSlotAreSpreadOut) {
  Bench b;
  BufloConfig cfg;
  cfg.slot = SimTime::ms(10);
  cfg.min_duration = SimTime{0};
  BufloDriver d(b.engine, b.port, 0, Endpoint::Client, cfg, SimTime{0}, 0);
  b.engine.set_dispatcher([&](const Event& ev) {
    if (ev.kind == EventKind::Generic) {
      d.hold(Cell(CellKind::Content, Direction::ServerBound, 0, b.engine.now()));
    } else {
      d.on_slot(ev.seq);
    }
  });
  b.engine.schedule(SimTime::ms(3), EventKind::Generic, 0);
  b.engine.schedule(SimTime::ms(4), EventKind::Generic, 0);
  b.engine.run_until(SimTime::sec(1));
  ASSERT_EQ(b.port.released.size(), 2u);
  EXPECT_EQ(b.port.released[0].first, SimTime::ms(10));
  EXPECT_GE(b.port.released[1].first - SimTime::ms(4), cfg.slot);
}

TEST(Buflo, IdleWindowIsConstantRatePadding) {
  Bench b;
  BufloConfig cfg;
  cfg.slot = SimTime::ms(5);
  cfg.min_duration = SimTime::ms(50);
  BufloDriver d(b.engine, b.port, 0, Endpoint::Middle, cfg, SimTime{0}, 0);
  b.engine.set_dispatcher([&](const Event& ev) {
    if (ev.kind == EventKind::Generic) {
      d.hold(Cell(CellKind::Content, Direction::ClientBound, 0, b.engine.now()));
    } else {
      d.on_slot(ev.seq);
    }
  });
  b.engine.schedule(SimTime::ms(1), EventKind::Generic, 0);
  b.engine.run_until(SimTime::sec(1));
  std::vector<SimTime> all = times(b.port.padding);
  all.push_back(b.port.released.at(0).first);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_EQ(all[i] - all[i - 1], cfg.slot);
}

TEST(Buflo, AuditAcceptsDriverOutputAndFlagsExtraCells) {
  Bench b;
  BufloConfig cfg;
  cfg.slot = SimTime::ms(10);
  cfg.min_duration = SimTime::ms(60);
  BufloDriver d(b.engine, b.port, 0, Endpoint::Middle, cfg, SimTime{0}, 0);
  b.engine.set_dispatcher([&](const Event& ev) { d.on_slot(ev.seq); });
  d.hold(Cell(CellKind::Content, Direction::ClientBound, 0, SimTime{0}));
  b.engine.run_until(SimTime::sec(1));
  std::vector<EgressRecord> log;
  for (auto& [t, c] : b.port.released) log.push_back({t, 0, Endpoint::Middle, CellKind::Content});
  for (auto& [t, e] : b.port.padding) log.push_back({t, 0, Endpoint::Middle, CellKind::Padding});
  std::sort(log.begin(), log.end(), [](auto& x, auto& y) { return x.at < y.at; });
  auto ok = audit_slots({&d}, log, b.engine.now());
  EXPECT_EQ(ok.violations, 0u);
  EXPECT_EQ(ok.slots_checked, 5u);  // 10..50 ms; the driver stops at 60 ms
  log.insert(log.begin() + 2, EgressRecord{SimTime::ms(25), 0, Endpoint::Middle, CellKind::Content});
  EXPECT_GT(audit_slots({&d}, log, b.engine.now()).violations, 0u);
}
