#ifndef PADSIM_APP_SCENARIO_HPP
#define PADSIM_APP_SCENARIO_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "padsim/defense/families.hpp"
#include "padsim/net/network.hpp"
#include "padsim/workload/workload.hpp"

namespace padsim {

struct HostGroupSpec {
  std::string name;
  Role role = Role::Guard;
  std::uint32_t count = 1;
  double up_rate = 0.0;
  double down_rate = 0.0;
  SimTime latency = SimTime::ms(5);
  std::optional<std::uint32_t> queue_cap;

  /// Name of the i-th host in the group.
  std::string host_name(std::uint32_t i) const { return count == 1 ? name : name + std::to_string(i); }
};

struct LinkSpec {
  std::string a, b;
  SimTime latency;
};

struct Scenario {
  std::string name = "scenario";
  SimTime duration = SimTime::sec(300);
  SimTime warmup = SimTime::sec(30);
  SimTime drain_limit = SimTime::sec(600);
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir;
  std::vector<HostGroupSpec> hosts;
  HostGroupSpec clients{"client", Role::Client, 1, 1.0e7, 0.0, SimTime::ms(5), std::nullopt};
  std::vector<LinkSpec> links;
  DefenseConfig defense;
  WorkloadConfig workload;
};

namespace scenario_json {

inline void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError((path.empty() ? k : path + "." + k) + ": unknown field");
  }
}

inline std::string sub(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline SimTime millis(const json& j, const std::string& path) {
  const double v = jsonio::number(j, path);
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  return SimTime::us(std::llround(v * 1000.0));
}

inline SimTime seconds(const json& j, const std::string& path) {
  const double v = jsonio::number(j, path);
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  return SimTime::from_seconds(v);
}

inline double json_seconds(SimTime t) { return static_cast<double>(t.count()) / 1e6; }
inline double json_millis(SimTime t) { return static_cast<double>(t.count()) / 1e3; }

inline Role role(const json& j, const std::string& path) {
  const auto s = jsonio::string(j, path);
  for (auto r : {Role::Guard, Role::Middle, Role::Exit, Role::Server}) {
    if (s == to_string(r)) return r;
  }
  throw ConfigError(path + ": role must be guard, middle, exit or server");
}

inline void host_rates(const json& j, HostGroupSpec& h, const std::string& path) {
  h.up_rate = jsonio::number(jsonio::require(j, "up_rate", path), sub(path, "up_rate"));
  if (!(h.up_rate > 0.0)) throw ConfigError(sub(path, "up_rate") + ": must be > 0 bytes/s");
  h.down_rate = jsonio::number_or(j, "down_rate", 0.0, path);
  if (h.down_rate < 0.0) throw ConfigError(sub(path, "down_rate") + ": must be >= 0 (0 = unlimited)");
  if (j.contains("latency_ms")) h.latency = millis(j.at("latency_ms"), sub(path, "latency_ms"));
  if (h.latency <= SimTime{0}) throw ConfigError(sub(path, "latency_ms") + ": must be > 0");
  if (j.contains("queue_cap") && !j.at("queue_cap").is_null()) {
    const auto c = jsonio::integer(j.at("queue_cap"), sub(path, "queue_cap"));
    if (c < 1) throw ConfigError(sub(path, "queue_cap") + ": must be >= 1 (or null for unbounded)");
    h.queue_cap = static_cast<std::uint32_t>(c);
  }
}

inline json host_json(const HostGroupSpec& h, bool with_identity) {
  json j{{"up_rate", h.up_rate},
         {"down_rate", h.down_rate},
         {"latency_ms", json_millis(h.latency)},
         {"queue_cap", h.queue_cap ? json(*h.queue_cap) : json(nullptr)}};
  if (with_identity) {
    j["name"] = h.name;
    j["role"] = to_string(h.role);
    j["count"] = h.count;
  }
  return j;
}

inline Distribution dist(const json& j, const std::string& key, const Distribution& def, const std::string& path) {
  if (!j.contains(key) || j.at(key).is_null()) return def;
  return distribution_from_json(j.at(key), sub(path, key));
}

inline WorkloadConfig workload(const json& j, const std::string& path) {
  using namespace jsonio;
  allow_keys(j,
             {"benchmark_clients", "background_clients", "size_classes", "think_time_us", "download_timeout_s",
              "window_cells", "sendme_every", "cell_payload_bytes", "background"},
             path);
  WorkloadConfig w;
  auto count = [&](const char* key, std::uint32_t def) {
    const auto v = integer_or(j, key, def, path);
    if (v < 0) throw ConfigError(sub(path, key) + ": must be >= 0");
    return static_cast<std::uint32_t>(v);
  };
  w.benchmark_clients = count("benchmark_clients", w.benchmark_clients);
  w.background_clients = count("background_clients", w.background_clients);
  if (j.contains("size_classes")) {
    const auto& s = j.at("size_classes");
    if (!s.is_array()) throw ConfigError(sub(path, "size_classes") + ": expected an array of byte counts");
    w.size_classes.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto p = sub(path, "size_classes") + "[" + std::to_string(i) + "]";
      const auto v = integer(s[i], p);
      if (v <= 0) throw ConfigError(p + ": zero-byte downloads are not allowed");
      w.size_classes.push_back(static_cast<std::uint64_t>(v));
    }
  }
  w.think_time = dist(j, "think_time_us", w.think_time, path);
  if (j.contains("download_timeout_s")) {
    const auto& t = j.at("download_timeout_s");
    w.download_timeout = t.is_null() ? std::nullopt : std::optional<SimTime>(seconds(t, sub(path, "download_timeout_s")));
  }
  w.window_cells = count("window_cells", w.window_cells);
  w.sendme_every = count("sendme_every", w.sendme_every);
  const auto payload = integer_or(j, "cell_payload_bytes", w.cell_payload, path);
  if (payload < 1 || payload > kCellSize) throw ConfigError(sub(path, "cell_payload_bytes") + ": must be in [1, 512]");
  w.cell_payload = static_cast<std::uint16_t>(payload);
  if (j.contains("background")) {
    const auto bp = sub(path, "background");
    const auto& b = j.at("background");
    allow_keys(b, {"rate_cells_per_s", "on_time_us", "off_time_us"}, bp);
    w.background_rate = number_or(b, "rate_cells_per_s", w.background_rate, bp);
    w.background_on = dist(b, "on_time_us", w.background_on, bp);
    w.background_off = dist(b, "off_time_us", w.background_off, bp);
  }
  w.validate();
  return w;
}

inline json workload_json(const WorkloadConfig& w) {
  return {{"benchmark_clients", w.benchmark_clients},
          {"background_clients", w.background_clients},
          {"size_classes", w.size_classes},
          {"think_time_us", to_json(w.think_time)},
          {"download_timeout_s", w.download_timeout ? json(json_seconds(*w.download_timeout)) : json(nullptr)},
          {"window_cells", w.window_cells},
          {"sendme_every", w.sendme_every},
          {"cell_payload_bytes", w.cell_payload},
          {"background",
           {{"rate_cells_per_s", w.background_rate},
            {"on_time_us", to_json(w.background_on)},
            {"off_time_us", to_json(w.background_off)}}}};
}

} // namespace scenario_json

/// Parses and validates a scenario. Diagnostics name the offending field.
inline Scenario scenario_from_json(const json& j) {
  using namespace jsonio;
  using namespace scenario_json;
  allow_keys(j,
             {"name", "duration_s", "warmup_s", "drain_limit_s", "seeds", "output_dir", "topology", "defense",
              "workload"},
             "");
  Scenario s;
  s.name = string_or(j, "name", s.name, "");
  if (j.contains("duration_s")) s.duration = seconds(j.at("duration_s"), "duration_s");
  if (j.contains("warmup_s")) s.warmup = seconds(j.at("warmup_s"), "warmup_s");
  if (j.contains("drain_limit_s")) s.drain_limit = seconds(j.at("drain_limit_s"), "drain_limit_s");
  if (s.warmup < SimTime{0}) throw ConfigError("warmup_s: must be >= 0");
  if (!(s.duration > s.warmup)) throw ConfigError("duration_s: must be greater than warmup_s");
  if (s.drain_limit < SimTime{0}) throw ConfigError("drain_limit_s: must be >= 0");
  if (j.contains("seeds")) {
    const auto& sd = j.at("seeds");
    if (!sd.is_array()) throw ConfigError("seeds: expected an array of integers");
    s.seeds.clear();
    for (std::size_t i = 0; i < sd.size(); ++i) {
      const auto v = integer(sd[i], "seeds[" + std::to_string(i) + "]");
      if (v < 0) throw ConfigError("seeds[" + std::to_string(i) + "]: must be >= 0");
      s.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }
  if (s.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  s.output_dir = string_or(j, "output_dir", "", "");

  const auto& topo = require(j, "topology", "");
  allow_keys(topo, {"hosts", "clients", "links"}, "topology");
  const auto& hosts = require(topo, "hosts", "topology");
  if (!hosts.is_array()) throw ConfigError("topology.hosts: expected an array");
  std::set<std::string> names;
  auto add_name = [&](const std::string& n, const std::string& path) {
    if (!names.insert(n).second) throw ConfigError(path + ": duplicate host name '" + n + "'");
  };
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    const auto p = "topology.hosts[" + std::to_string(i) + "]";
    const auto& hj = hosts[i];
    allow_keys(hj, {"name", "role", "count", "up_rate", "down_rate", "latency_ms", "queue_cap"}, p);
    HostGroupSpec h;
    h.name = string(require(hj, "name", p), p + ".name");
    if (h.name.empty()) throw ConfigError(p + ".name: must not be empty");
    h.role = role(require(hj, "role", p), p + ".role");
    const auto count = integer_or(hj, "count", 1, p);
    if (count < 1) throw ConfigError(p + ".count: must be >= 1");
    h.count = static_cast<std::uint32_t>(count);
    host_rates(hj, h, p);
    for (std::uint32_t k = 0; k < h.count; ++k) add_name(h.host_name(k), p);
    s.hosts.push_back(std::move(h));
  }
  if (topo.contains("clients")) {
    allow_keys(topo.at("clients"), {"up_rate", "down_rate", "latency_ms", "queue_cap"}, "topology.clients");
    host_rates(topo.at("clients"), s.clients, "topology.clients");
  }

  if (j.contains("defense")) s.defense = defense_config_from_json(j.at("defense"), "defense");
  make_defense(s.defense);  // validates
  if (j.contains("workload")) s.workload = workload(j.at("workload"), "workload");
  s.workload.validate();

  for (std::uint32_t i = 0; i < s.workload.benchmark_clients; ++i) add_name("bench" + std::to_string(i), "workload");
  for (std::uint32_t i = 0; i < s.workload.background_clients; ++i) add_name("bg" + std::to_string(i), "workload");
  if (s.workload.benchmark_clients + s.workload.background_clients > 0) {
    for (auto r : {Role::Guard, Role::Middle, Role::Exit, Role::Server}) {
      bool found = false;
      for (const auto& h : s.hosts) found = found || h.role == r;
      if (!found) throw ConfigError(std::string("topology.hosts: no host with role '") + to_string(r) + "'");
    }
  }

  if (topo.contains("links")) {
    const auto& links = topo.at("links");
    if (!links.is_array()) throw ConfigError("topology.links: expected an array");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto p = "topology.links[" + std::to_string(i) + "]";
      allow_keys(links[i], {"a", "b", "latency_ms"}, p);
      LinkSpec l;
      l.a = string(require(links[i], "a", p), p + ".a");
      l.b = string(require(links[i], "b", p), p + ".b");
      if (!names.count(l.a)) throw ConfigError(p + ".a: unknown host '" + l.a + "'");
      if (!names.count(l.b)) throw ConfigError(p + ".b: unknown host '" + l.b + "'");
      l.latency = millis(require(links[i], "latency_ms", p), p + ".latency_ms");
      if (l.latency <= SimTime{0}) throw ConfigError(p + ".latency_ms: must be > 0");
      s.links.push_back(std::move(l));
    }
  }
  return s;
}

/// Normalized scenario: defaults filled in, stable key order.
inline json to_json(const Scenario& s) {
  using namespace scenario_json;
  json hosts = json::array();
  for (const auto& h : s.hosts) hosts.push_back(host_json(h, true));
  json links = json::array();
  for (const auto& l : s.links) links.push_back({{"a", l.a}, {"b", l.b}, {"latency_ms", json_millis(l.latency)}});
  json j{{"name", s.name},
         {"duration_s", json_seconds(s.duration)},
         {"warmup_s", json_seconds(s.warmup)},
         {"drain_limit_s", json_seconds(s.drain_limit)},
         {"seeds", s.seeds},
         {"topology", {{"hosts", hosts}, {"clients", host_json(s.clients, false)}, {"links", links}}},
         {"defense", to_json(s.defense)},
         {"workload", workload_json(s.workload)}};
  if (!s.output_dir.empty()) j["output_dir"] = s.output_dir;
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Identity of what is simulated: everything except seeds and output location.
inline std::string scenario_hash(const Scenario& s) {
  auto j = to_json(s);
  j.erase("seeds");
  j.erase("output_dir");
  return hex64(fnv1a64(j.dump()));
}

/// As scenario_hash, additionally ignoring the defense: runs comparable
/// across defenses share it.
inline std::string base_hash(const Scenario& s) {
  auto j = to_json(s);
  j.erase("seeds");
  j.erase("output_dir");
  j.erase("defense");
  return hex64(fnv1a64(j.dump()));
}

/// Hash of the defense section alone.
inline std::string defense_hash(const DefenseConfig& d) { return hex64(fnv1a64(to_json(d).dump())); }

} // namespace padsim

#endif // PADSIM_APP_SCENARIO_HPP
