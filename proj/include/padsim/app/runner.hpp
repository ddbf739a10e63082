#ifndef PADSIM_APP_RUNNER_HPP
#define PADSIM_APP_RUNNER_HPP

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "padsim/app/simulation.hpp"
#include "padsim/metrics/records_io.hpp"

#ifndef PADSIM_VERSION
#define PADSIM_VERSION "0.0.0"
#endif

namespace padsim {

inline constexpr const char* kToolVersion = PADSIM_VERSION;
inline constexpr const char* kOutEnv = "PADSIM_OUT";

/// Output root: explicit flag, then the environment, then the scenario's
/// output_dir, then ./runs.
inline std::string resolve_out_root(const std::string& flag, const Scenario& sc) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  if (!sc.output_dir.empty()) return sc.output_dir;
  return "runs";
}

inline json run_stats(const RunResult& r) {
  json hosts = json::array();
  double max_relay = 0.0;
  std::map<std::string, std::pair<double, int>> by_role;
  for (const auto& h : r.hosts) {
    if (h.role == Role::Guard || h.role == Role::Middle || h.role == Role::Exit) {
      max_relay = std::max(max_relay, h.utilization);
    }
    auto& acc = by_role[to_string(h.role)];
    acc.first += h.utilization;
    acc.second += 1;
    if (h.role != Role::Client) {
      hosts.push_back({{"name", h.name}, {"cells_sent", h.cells_sent}, {"padding_sent", h.padding_sent},
                       {"utilization", std::round(h.utilization * 10000.0) / 10000.0}});
    }
  }
  json roles = json::object();
  for (const auto& [role, acc] : by_role) roles[role] = std::round(acc.first / acc.second * 10000.0) / 10000.0;
  std::map<std::string, std::uint64_t> status;
  for (const auto* d : r.measured()) ++status[to_string(d->status)];
  return {{"drops_closed", r.net.drops_closed},
          {"drops_queue_full", r.net.drops_queue_full},
          {"drops_unknown", r.net.drops_unknown},
          {"cells_delivered", r.net.cells_delivered},
          {"slot_audit", {{"circuits", r.buflo_circuits}, {"slots_checked", r.audit.slots_checked},
                          {"violations", r.audit.violations}, {"details", r.audit.details}}},
          {"event_log_hash", hex64(r.event_log_hash)},
          {"events_dispatched", r.events_dispatched},
          {"end_us", r.end_time.count()},
          {"drain_cut", r.drain_cut},
          {"downloads_total", r.records.size()},
          {"downloads_measured", r.measured().size()},
          {"status_measured", status},
          {"max_relay_utilization", std::round(max_relay * 10000.0) / 10000.0},
          {"mean_utilization_by_role", roles},
          {"hosts", hosts}};
}

struct RunSpec {
  Scenario scenario;
  std::uint64_t seed = 1;
  std::string dir;
  json overrides = json::array();
  bool events_log = false;
};

struct RunSummary {
  std::string dir;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  json stats;
};

/// Runs one simulation and writes its raw CSVs and manifest into spec.dir.
/// An invariant breach is reported as !ok after the outputs are written.
inline RunSummary execute_run(const RunSpec& spec) {
  RunSummary s;
  s.dir = spec.dir;
  s.seed = spec.seed;
  std::filesystem::create_directories(spec.dir);
  RunOptions opt;
  opt.keep_event_log = spec.events_log;
  Simulation sim(spec.scenario, spec.seed, opt);
  const auto r = sim.run();
  write_records(r.measured(), spec.dir);
  std::vector<std::string> files{"downloads.csv", "progress.csv", "manifest.json"};
  if (spec.events_log) {
    csv::Writer w(spec.dir + "/events.log");
    w.row({"fire_at_us", "seq", "kind", "target"});
    for (const auto& e : r.event_log) {
      w.row({std::to_string(e.fire_at.count()), std::to_string(e.seq), to_string(e.kind), std::to_string(e.target)});
    }
    w.close();
    files.push_back("events.log");
  }
  auto effective = to_json(spec.scenario);
  effective["seeds"] = json::array({spec.seed});
  effective.erase("output_dir");
  s.stats = run_stats(r);
  const json manifest{{"tool_version", kToolVersion},
                      {"scenario", effective},
                      {"scenario_hash", scenario_hash(spec.scenario)},
                      {"base_hash", base_hash(spec.scenario)},
                      {"defense_hash", defense_hash(spec.scenario.defense)},
                      {"label", spec.scenario.defense.effective_label()},
                      {"defense", spec.scenario.defense.name},
                      {"seed", spec.seed},
                      {"overrides", spec.overrides},
                      {"files", files},
                      {"stats", s.stats}};
  std::ofstream(spec.dir + "/manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
  if (r.audit.violations > 0) {
    s.error = "slot audit: " + std::to_string(r.audit.violations) + " violations";
    return s;
  }
  s.ok = true;
  return s;
}

/// Runs several simulations on up to `workers` threads. Runs share nothing.
inline std::vector<RunSummary> execute_runs(const std::vector<RunSpec>& specs, unsigned workers) {
  std::vector<RunSummary> out(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        out[i] = execute_run(specs[i]);
      } catch (const std::exception& e) {
        out[i].dir = specs[i].dir;
        out[i].seed = specs[i].seed;
        out[i].ok = false;
        out[i].error = e.what();
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(specs.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

/// One run directory per seed: <root>/<label>/seed-<n>.
inline std::vector<RunSpec> plan_runs(const Scenario& sc, const std::string& root, const json& overrides,
                                      bool events_log) {
  std::vector<RunSpec> specs;
  for (auto seed : sc.seeds) {
    RunSpec s;
    s.scenario = sc;
    s.seed = seed;
    s.dir = root + "/" + sc.defense.effective_label() + "/seed-" + std::to_string(seed);
    s.overrides = overrides;
    s.events_log = events_log;
    specs.push_back(std::move(s));
  }
  return specs;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Rebuilds the run described by a manifest.
inline RunSpec spec_from_manifest(const std::string& manifest_path, const std::string& dir) {
  const auto m = read_json(manifest_path);
  RunSpec s;
  s.scenario = scenario_from_json(jsonio::require(m, "scenario", manifest_path));
  s.seed = static_cast<std::uint64_t>(jsonio::integer(jsonio::require(m, "seed", manifest_path), "seed"));
  if (scenario_hash(s.scenario) != jsonio::string(jsonio::require(m, "scenario_hash", manifest_path), "scenario_hash")) {
    throw ConfigError(manifest_path + ": scenario does not match its recorded hash");
  }
  s.overrides = m.value("overrides", json::array());
  s.dir = dir;
  return s;
}

} // namespace padsim

#endif // PADSIM_APP_RUNNER_HPP
