#ifndef PADSIM_APP_SIMULATION_HPP
#define PADSIM_APP_SIMULATION_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "padsim/app/scenario.hpp"
#include "padsim/defense/runtime.hpp"
#include "padsim/net/network.hpp"
#include "padsim/workload/workload.hpp"

namespace padsim {

struct RunOptions {
  bool keep_event_log = false;
  bool capture_traces = false;
  /// Leave the defense layer out of the network entirely (used to check that
  /// defense "none" is indistinguishable from no defense module).
  bool detach_defense = false;
};

struct HostUsage {
  std::string name;
  Role role;
  std::uint64_t cells_sent = 0;
  std::uint64_t padding_sent = 0;
  double utilization = 0.0;  // busy fraction of the egress pipe over the run
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<DownloadRecord> records;
  NetworkStats net;
  SlotAuditResult audit;
  std::uint64_t buflo_circuits = 0;
  std::uint64_t event_log_hash = 0;
  std::uint64_t events_dispatched = 0;
  std::vector<DispatchRecord> event_log;
  SimTime end_time{0};
  SimTime warmup{0};
  bool drain_cut = false;
  std::vector<HostUsage> hosts;

  /// Records that count toward metrics: started after warmup.
  std::vector<const DownloadRecord*> measured() const {
    std::vector<const DownloadRecord*> out;
    for (const auto& r : records) {
      if (r.start >= warmup) out.push_back(&r);
    }
    return out;
  }
};

/// One simulation of a scenario under one seed.
class Simulation {
public:
  Simulation(const Scenario& sc, std::uint64_t seed, RunOptions opt = {})
      : sc_(sc), seed_(seed), opt_(opt), net_(engine_) {
    WorkloadHosts wh;
    std::map<std::string, HostId> by_name;
    auto add = [&](const HostGroupSpec& g, const std::string& name, Role role) {
      HostSpec h;
      h.name = name;
      h.role = role;
      h.up_rate = g.up_rate;
      h.down_rate = g.down_rate;
      h.queue_cap = g.queue_cap;
      h.access_latency = g.latency;
      const auto id = net_.add_host(h);
      by_name[name] = id;
      return id;
    };
    for (const auto& g : sc_.hosts) {
      for (std::uint32_t i = 0; i < g.count; ++i) {
        const auto id = add(g, g.host_name(i), g.role);
        switch (g.role) {
          case Role::Guard: wh.guards.push_back(id); break;
          case Role::Middle: wh.middles.push_back(id); break;
          case Role::Exit: wh.exits.push_back(id); break;
          case Role::Server: wh.servers.push_back(id); break;
          case Role::Client: break;
        }
      }
    }
    for (std::uint32_t i = 0; i < sc_.workload.benchmark_clients; ++i) {
      wh.benchmark_clients.push_back(add(sc_.clients, "bench" + std::to_string(i), Role::Client));
    }
    for (std::uint32_t i = 0; i < sc_.workload.background_clients; ++i) {
      wh.background_clients.push_back(add(sc_.clients, "bg" + std::to_string(i), Role::Client));
    }
    for (const auto& l : sc_.links) net_.set_link_latency(by_name.at(l.a), by_name.at(l.b), l.latency);

    defense_ = std::make_unique<DefenseRuntime>(make_defense(sc_.defense), engine_, net_, seed_);
    if (!opt_.detach_defense) net_.set_defense(defense_.get());
    net_.record_egress(defense_->spec().buflo.has_value());

    auto wcfg = sc_.workload;
    wcfg.capture_traces = opt_.capture_traces;
    workload_ = std::make_unique<Workload>(engine_, net_, wcfg, wh, seed_, sc_.defense.failure_probability,
                                           sc_.duration);
    net_.set_application(workload_.get());
    engine_.keep_log(opt_.keep_event_log);
    engine_.set_dispatcher([this](const Event& ev) { dispatch(ev); });
  }

  RunResult run() {
    workload_->start();
    engine_.run_until(sc_.duration);
    const SimTime cutoff = sc_.duration + sc_.drain_limit;
    bool cut = false;
    while (workload_->in_flight() > 0) {
      if (engine_.next_time() > cutoff || !engine_.step()) {
        cut = true;
        break;
      }
    }
    // finish everything due at the final instant so audits see whole slots
    engine_.run_until(engine_.now());
    if (workload_->in_flight() > 0) workload_->expire_all();

    RunResult r;
    r.seed = seed_;
    r.warmup = sc_.warmup;
    r.end_time = engine_.now();
    r.drain_cut = cut;
    r.net = net_.stats();
    if (defense_->spec().buflo) {
      const auto drivers = defense_->drivers();
      r.buflo_circuits = drivers.size();
      r.audit = audit_slots(drivers, net_.egress_log(), engine_.now());
    }
    r.event_log_hash = engine_.log_hash();
    r.events_dispatched = engine_.dispatched();
    r.event_log = engine_.log();
    const double span = static_cast<double>(std::max<std::int64_t>(1, engine_.now().count()));
    for (HostId h = 0; h < net_.host_count(); ++h) {
      const auto& host = net_.host(h);
      r.hosts.push_back({host.spec.name, host.spec.role, host.cells_sent, host.padding_sent,
                         static_cast<double>(host.cells_sent) * static_cast<double>(host.egress_ser.count()) / span});
    }
    for (const auto& rec : workload_->records()) {
      if (rec.status == DownloadStatus::InFlight) {
        throw InvariantError("download " + std::to_string(rec.id) + " ended the run without a status");
      }
      if (rec.succeeded() && rec.content_bytes() != rec.size) {
        throw InvariantError("download " + std::to_string(rec.id) + ": conservation breach");
      }
    }
    r.records = std::move(workload_->records());
    return r;
  }

  Engine& engine() { return engine_; }
  Network& network() { return net_; }
  DefenseRuntime& defense() { return *defense_; }
  Workload& workload() { return *workload_; }

private:
  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::CellArrival:
      case EventKind::CellIngress: net_.handle(ev); break;
      case EventKind::PaddingTimer:
      case EventKind::SlotTimer: defense_->handle(ev); break;
      default: workload_->handle(ev); break;
    }
  }

  Scenario sc_;
  std::uint64_t seed_;
  RunOptions opt_;
  Engine engine_;
  Network net_;
  std::unique_ptr<DefenseRuntime> defense_;
  std::unique_ptr<Workload> workload_;
};

} // namespace padsim

#endif // PADSIM_APP_SIMULATION_HPP
