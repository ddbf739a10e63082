#ifndef PADSIM_DEFENSE_MACHINE_HPP
#define PADSIM_DEFENSE_MACHINE_HPP

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "padsim/net/tunnel.hpp"
#include "padsim/sim/distribution.hpp"
#include "padsim/sim/errors.hpp"
#include "padsim/sim/rng.hpp"

namespace padsim {

struct StateSpec {
  std::string id;
  /// Delay before the next padding cell, in microseconds. Absent: the state
  /// never pads.
  std::optional<Distribution> iat;
  /// Padding cells allowed per visit. Absent: unlimited.
  std::optional<Distribution> length;
  std::map<Trigger, std::string> transitions;
};

struct MachineSpec {
  std::string name;
  Endpoint endpoint = Endpoint::Middle;
  std::vector<StateSpec> states;
  std::string start_state;
  std::optional<std::uint64_t> budget;
  Direction allowed_on = Direction::ClientBound;
};

/// A validated machine with transitions resolved to state indices.
class CompiledMachine {
public:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  explicit CompiledMachine(MachineSpec spec) : spec_(std::move(spec)) {
    const std::string where = "machine '" + spec_.name + "'";
    if (spec_.states.empty()) throw ConfigError(where + ": no states");
    if (spec_.allowed_on != padding_direction(spec_.endpoint)) {
      throw ConfigError(where + ": a " + std::string(to_string(spec_.endpoint)) +
                        " machine may only pad " + to_string(padding_direction(spec_.endpoint)));
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < spec_.states.size(); ++i) {
      if (!index.emplace(spec_.states[i].id, i).second) {
        throw ConfigError(where + ": duplicate state '" + spec_.states[i].id + "'");
      }
    }
    auto start = index.find(spec_.start_state);
    if (start == index.end()) throw ConfigError(where + ": start_state '" + spec_.start_state + "' does not exist");
    start_ = start->second;
    table_.resize(spec_.states.size());
    for (std::size_t i = 0; i < spec_.states.size(); ++i) {
      const auto& st = spec_.states[i];
      const std::string sw = where + " state '" + st.id + "'";
      if (st.iat) validate(*st.iat, sw + " iat");
      if (st.length) validate(*st.length, sw + " length");
      table_[i].fill(kNone);
      for (const auto& [trigger, target] : st.transitions) {
        auto t = index.find(target);
        if (t == index.end()) throw ConfigError(sw + ": transition to unknown state '" + target + "'");
        table_[i][static_cast<std::size_t>(trigger)] = t->second;
      }
    }
  }

  const MachineSpec& spec() const { return spec_; }
  std::size_t start() const { return start_; }
  std::size_t target(std::size_t state, Trigger t) const { return table_[state][static_cast<std::size_t>(t)]; }
  const StateSpec& state(std::size_t i) const { return spec_.states[i]; }
  std::size_t state_count() const { return spec_.states.size(); }

private:
  MachineSpec spec_;
  std::size_t start_ = 0;
  std::vector<std::array<std::size_t, kTriggerCount>> table_;
};

/// One running padding machine on one circuit endpoint. At most one padding
/// timer is pending at any time.
class MachineInstance {
public:
  MachineInstance(std::shared_ptr<const CompiledMachine> spec, CircuitId circuit, EntityId self, Engine& engine,
                  TunnelPort& port, RngStream rng)
      : spec_(std::move(spec)),
        circuit_(circuit),
        self_(self),
        engine_(engine),
        port_(port),
        rng_(std::move(rng)) {
    for (std::size_t i = 0; i < spec_->state_count(); ++i) {
      const auto& st = spec_->state(i);
      samplers_.emplace_back(st.iat ? Sampler(*st.iat) : Sampler());
      length_samplers_.emplace_back(st.length ? Sampler(*st.length) : Sampler());
    }
    if (spec_->spec().budget) budget_left_ = *spec_->spec().budget;
  }

  MachineInstance(const MachineInstance&) = delete;
  MachineInstance& operator=(const MachineInstance&) = delete;

  void start() { enter(spec_->start(), 0); }

  /// Takes the transition defined for `t` in the current state, if any.
  void on_event(Trigger t) {
    if (stopped_) return;
    follow(t, 0);
  }

  void on_timer(EventHandle h) {
    if (stopped_ || !timer_ || *timer_ != h) return;
    timer_.reset();
    if (!port_.circuit_open(circuit_)) return;
    if (budget_left_) --*budget_left_;
    ++visit_sent_;
    ++total_sent_;
    port_.emit_padding(circuit_, endpoint());
    if (stopped_) return;  // emitting may kill the circuit
    if (spec_->target(state_, Trigger::PaddingSent) != CompiledMachine::kNone) {
      follow(Trigger::PaddingSent, 0);
      return;
    }
    if (quota_ && visit_sent_ >= *quota_) {
      follow(Trigger::LengthExceeded, 0);
      return;
    }
    schedule_padding(0);
  }

  void stop() {
    cancel_timer();
    stopped_ = true;
  }

  Endpoint endpoint() const { return spec_->spec().endpoint; }
  CircuitId circuit() const { return circuit_; }
  const std::string& state_id() const { return spec_->state(state_).id; }
  bool timer_pending() const { return timer_.has_value(); }
  std::uint64_t padding_sent() const { return total_sent_; }
  std::optional<std::uint64_t> budget_left() const { return budget_left_; }
  std::uint64_t transitions() const { return transitions_; }

private:
  static constexpr int kMaxChain = 1000;

  void follow(Trigger t, int depth) {
    const auto next = spec_->target(state_, t);
    if (next == CompiledMachine::kNone) return;
    cancel_timer();
    enter(next, depth + 1);
  }

  void enter(std::size_t s, int depth) {
    if (depth > kMaxChain) return;  // runaway transition chain: stay idle
    state_ = s;
    ++transitions_;
    engine_.note(EventKind::MachineTransition, self_);
    visit_sent_ = 0;
    quota_.reset();
    samplers_[s].refill();
    if (spec_->state(s).length) {
      length_samplers_[s].refill();
      auto q = length_samplers_[s].draw(rng_);
      if (q) quota_ = static_cast<std::uint64_t>(*q);
      if (quota_ && *quota_ == 0) {
        if (spec_->target(s, Trigger::LengthExceeded) != CompiledMachine::kNone) {
          follow(Trigger::LengthExceeded, depth);
        }
        return;
      }
    }
    schedule_padding(depth);
  }

  void schedule_padding(int depth) {
    cancel_timer();
    if (budget_left_ && *budget_left_ == 0) return;
    if (!spec_->state(state_).iat) return;
    if (quota_ && visit_sent_ >= *quota_) return;
    auto delay = samplers_[state_].draw(rng_);
    if (!delay) {
      if (spec_->target(state_, Trigger::InfinitySampled) != CompiledMachine::kNone) {
        follow(Trigger::InfinitySampled, depth);
      }
      return;
    }
    timer_ = engine_.schedule_in(SimTime::us(*delay), EventKind::PaddingTimer, self_);
  }

  void cancel_timer() {
    if (timer_) {
      engine_.cancel(*timer_);
      timer_.reset();
    }
  }

  std::shared_ptr<const CompiledMachine> spec_;
  CircuitId circuit_;
  EntityId self_;
  Engine& engine_;
  TunnelPort& port_;
  RngStream rng_;
  std::vector<Sampler> samplers_;
  std::vector<Sampler> length_samplers_;
  std::size_t state_ = 0;
  std::optional<EventHandle> timer_;
  std::uint64_t visit_sent_ = 0;
  std::optional<std::uint64_t> quota_;
  std::optional<std::uint64_t> budget_left_;
  std::uint64_t total_sent_ = 0;
  std::uint64_t transitions_ = 0;
  bool stopped_ = false;
};

} // namespace padsim

#endif // PADSIM_DEFENSE_MACHINE_HPP
