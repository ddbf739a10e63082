#ifndef PADSIM_DEFENSE_RUNTIME_HPP
#define PADSIM_DEFENSE_RUNTIME_HPP

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "padsim/defense/buflo.hpp"
#include "padsim/defense/families.hpp"
#include "padsim/defense/machine.hpp"

namespace padsim {

inline std::string machine_stream_id(CircuitId c, Endpoint at) {
  return "machine/" + std::to_string(c) + "/" + to_string(at);
}

/// Attaches a defense to every circuit opened on a tunnel and routes cell
/// events and timers to the per-circuit machines and slot drivers.
class DefenseRuntime : public DefenseHooks {
public:
  DefenseRuntime(DefenseSpec spec, Engine& engine, TunnelPort& port, std::uint64_t seed)
      : spec_(std::move(spec)), engine_(engine), port_(port), seed_(seed) {}

  const DefenseSpec& spec() const { return spec_; }

  void circuit_opened(CircuitId c, SimTime at) override {
    if (!spec_.active()) return;
    if (attached_.size() <= c) attached_.resize(c + 1);
    auto& a = attached_[c];
    for (const auto& m : spec_.machines) {
      const auto id = static_cast<EntityId>(machines_.size());
      machines_.push_back(std::make_unique<MachineInstance>(m, c, id, engine_, port_,
                                                            RngStream(seed_, machine_stream_id(c, m->spec().endpoint))));
      a.machine[index(m->spec().endpoint)] = static_cast<std::int64_t>(id);
    }
    if (spec_.buflo) {
      for (auto e : {Endpoint::Client, Endpoint::Middle}) {
        if (!spec_.buflo->active_at(e)) continue;
        const auto id = static_cast<EntityId>(drivers_.size());
        drivers_.push_back(std::make_unique<BufloDriver>(engine_, port_, c, e, *spec_.buflo, at, id));
        a.driver[index(e)] = static_cast<std::int64_t>(id);
      }
    }
    for (auto e : {Endpoint::Client, Endpoint::Middle}) {
      if (auto* m = machine(c, e)) m->start();
    }
  }

  void circuit_closed(CircuitId c) override {
    if (c >= attached_.size()) return;
    for (auto e : {Endpoint::Client, Endpoint::Middle}) {
      if (auto* m = machine(c, e)) m->stop();
      if (auto* d = driver(c, e)) d->stop();
    }
  }

  void cell_event(CircuitId c, Endpoint at, Trigger t) override {
    if (auto* m = machine(c, at)) m->on_event(t);
  }

  bool hold(CircuitId c, Endpoint at, const Cell& cell) override {
    if (auto* d = driver(c, at)) {
      d->hold(cell);
      return true;
    }
    return false;
  }

  void handle(const Event& ev) override {
    if (ev.kind == EventKind::PaddingTimer) {
      machines_.at(ev.target)->on_timer(ev.seq);
    } else if (ev.kind == EventKind::SlotTimer) {
      drivers_.at(ev.target)->on_slot(ev.seq);
    }
  }

  MachineInstance* machine(CircuitId c, Endpoint at) {
    if (c >= attached_.size()) return nullptr;
    const auto id = attached_[c].machine[index(at)];
    return id < 0 ? nullptr : machines_[static_cast<std::size_t>(id)].get();
  }

  BufloDriver* driver(CircuitId c, Endpoint at) {
    if (c >= attached_.size()) return nullptr;
    const auto id = attached_[c].driver[index(at)];
    return id < 0 ? nullptr : drivers_[static_cast<std::size_t>(id)].get();
  }

  std::vector<const BufloDriver*> drivers() const {
    std::vector<const BufloDriver*> out;
    for (const auto& d : drivers_) out.push_back(d.get());
    return out;
  }

  std::size_t machine_count() const { return machines_.size(); }

private:
  struct Attachment {
    std::array<std::int64_t, 2> machine{-1, -1};
    std::array<std::int64_t, 2> driver{-1, -1};
  };

  static std::size_t index(Endpoint e) { return e == Endpoint::Client ? 0 : 1; }

  DefenseSpec spec_;
  Engine& engine_;
  TunnelPort& port_;
  std::uint64_t seed_;
  std::vector<Attachment> attached_;
  std::vector<std::unique_ptr<MachineInstance>> machines_;
  std::vector<std::unique_ptr<BufloDriver>> drivers_;
};

} // namespace padsim

#endif // PADSIM_DEFENSE_RUNTIME_HPP
