#ifndef PADSIM_DEFENSE_FAMILIES_HPP
#define PADSIM_DEFENSE_FAMILIES_HPP

#include <cctype>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "padsim/defense/buflo.hpp"
#include "padsim/defense/json_io.hpp"
#include "padsim/defense/machine.hpp"

namespace padsim {

/// Defense section of a scenario, as written by the user.
struct DefenseConfig {
  std::string name = "none";
  std::string label;  // report column prefix; defaults to name
  json params = json::object();
  /// Per padding cell at the client, probability that the circuit is doomed.
  double failure_probability = 0.0;

  std::string effective_label() const { return label.empty() ? name : label; }
};

/// A ready-to-instantiate defense: machines per endpoint and/or a BuFlo
/// configuration.
struct DefenseSpec {
  std::string name = "none";
  std::string label = "none";
  std::vector<std::shared_ptr<const CompiledMachine>> machines;
  std::optional<BufloConfig> buflo;
  double failure_probability = 0.0;

  bool active() const { return !machines.empty() || buflo.has_value(); }
  bool padding_only() const { return !buflo.has_value(); }
};

namespace families {

inline std::set<Endpoint> endpoints(const json& p, const std::set<Endpoint>& def, const std::string& path) {
  if (!p.contains("endpoints")) return def;
  const auto& e = p.at("endpoints");
  if (!e.is_array() || e.empty()) throw ConfigError(path + ".endpoints: expected a non-empty array");
  std::set<Endpoint> out;
  for (std::size_t i = 0; i < e.size(); ++i) out.insert(jsonio::endpoint(e[i], path + ".endpoints[" + std::to_string(i) + "]"));
  return out;
}

inline std::optional<std::uint64_t> budget(const json& p, const std::string& path) {
  if (!p.contains("budget") || p.at("budget").is_null()) return std::nullopt;
  const auto b = jsonio::integer(p.at("budget"), path + ".budget");
  if (b < 0) throw ConfigError(path + ".budget: must be >= 0");
  return static_cast<std::uint64_t>(b);
}

/// Gap filler: after each non-padding cell sent from the endpoint, sample a
/// delay from a token histogram; if no real cell follows within it, send
/// `pads_per_gap` padding cells. Sampling the infinity bin pads nothing.
inline MachineSpec adaptive_gap_machine(Endpoint at, const Histogram& h, std::int64_t pads_per_gap,
                                        std::optional<std::uint64_t> budget) {
  MachineSpec m;
  m.name = std::string("adaptive_gap-") + to_string(at);
  m.endpoint = at;
  m.allowed_on = padding_direction(at);
  m.start_state = "idle";
  m.budget = budget;
  StateSpec idle{"idle", std::nullopt, std::nullopt, {{Trigger::NonPaddingSent, "gap"}}};
  StateSpec gap{"gap",
                h,
                Uniform{pads_per_gap, pads_per_gap},
                {{Trigger::NonPaddingSent, "gap"}, {Trigger::LengthExceeded, "idle"}, {Trigger::InfinitySampled, "idle"}}};
  m.states = {idle, gap};
  return m;
}

/// Burst extender: once `burst_gap` passes without a non-padding cell the
/// burst is over; one padding cell goes out, followed by min(G, max_extra-1)
/// more where G ~ geometric(p_extend).
inline MachineSpec burst_extend_machine(Endpoint at, double p_extend, std::int64_t max_extra, std::int64_t burst_gap_us,
                                        Uniform extend_iat, std::optional<std::uint64_t> budget) {
  MachineSpec m;
  m.name = std::string("burst_extend-") + to_string(at);
  m.endpoint = at;
  m.allowed_on = padding_direction(at);
  m.start_state = "idle";
  m.budget = budget;
  StateSpec idle{"idle", std::nullopt, std::nullopt, {{Trigger::NonPaddingSent, "burst"}}};
  StateSpec burst{"burst",
                  Uniform{burst_gap_us, burst_gap_us},
                  std::nullopt,
                  {{Trigger::NonPaddingSent, "burst"}, {Trigger::PaddingSent, "extend"}}};
  StateSpec extend{"extend",
                   extend_iat,
                   Geometric{p_extend, max_extra - 1},
                   {{Trigger::NonPaddingSent, "burst"}, {Trigger::LengthExceeded, "idle"}}};
  m.states = {idle, burst, extend};
  return m;
}

} // namespace families

/// Builds the named defense. Families: none, adaptive_gap, burst_extend,
/// buflo, and custom (explicit machine list).
inline DefenseSpec make_defense(const DefenseConfig& cfg) {
  const std::string path = "defense.params";
  const json& p = cfg.params.is_null() ? json::object() : cfg.params;
  if (!p.is_object()) throw ConfigError(path + ": expected an object");
  if (!(cfg.failure_probability >= 0.0 && cfg.failure_probability <= 1.0)) {
    throw ConfigError("defense.failure_probability: must be in [0, 1]");
  }
  DefenseSpec out;
  out.name = cfg.name;
  out.label = cfg.effective_label();
  for (char ch : out.label) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) {
      throw ConfigError("defense.label: only letters, digits, '_', '-' and '.' are allowed");
    }
  }
  out.failure_probability = cfg.failure_probability;
  auto add = [&](MachineSpec m) { out.machines.push_back(std::make_shared<const CompiledMachine>(std::move(m))); };

  if (cfg.name == "none") {
    return out;
  }
  if (cfg.name == "adaptive_gap") {
    Histogram h;
    h.edges = {0, 1000};
    h.tokens = {5};
    h.infinity_tokens = 5;
    if (p.contains("edges_us")) {
      h.edges.clear();
      for (std::size_t i = 0; i < p.at("edges_us").size(); ++i) {
        h.edges.push_back(jsonio::integer(p.at("edges_us")[i], path + ".edges_us[" + std::to_string(i) + "]"));
      }
    }
    if (p.contains("tokens")) {
      h.tokens.clear();
      for (std::size_t i = 0; i < p.at("tokens").size(); ++i) {
        const auto t = jsonio::integer(p.at("tokens")[i], path + ".tokens[" + std::to_string(i) + "]");
        if (t < 0) throw ConfigError(path + ".tokens: must be >= 0");
        h.tokens.push_back(static_cast<std::uint32_t>(t));
      }
    }
    const auto inf = jsonio::integer_or(p, "infinity_tokens", h.infinity_tokens, path);
    if (inf < 0) throw ConfigError(path + ".infinity_tokens: must be >= 0");
    h.infinity_tokens = static_cast<std::uint32_t>(inf);
    h.token_removal = jsonio::boolean_or(p, "token_removal", true, path);
    validate(h, path + " histogram");
    const auto pads = jsonio::integer_or(p, "pads_per_gap", 1, path);
    if (pads < 1) throw ConfigError(path + ".pads_per_gap: must be >= 1");
    const auto b = families::budget(p, path);
    for (auto e : families::endpoints(p, {Endpoint::Client, Endpoint::Middle}, path)) {
      add(families::adaptive_gap_machine(e, h, pads, b));
    }
    return out;
  }
  if (cfg.name == "burst_extend") {
    const double pe = jsonio::number_or(p, "p_extend", 0.5, path);
    if (!(pe > 0.0 && pe <= 1.0)) throw ConfigError(path + ".p_extend: must be in (0, 1]");
    const auto max_extra = jsonio::integer_or(p, "max_extra", 10, path);
    if (max_extra < 1) throw ConfigError(path + ".max_extra: must be >= 1");
    const auto gap = jsonio::integer_or(p, "burst_gap_us", 20000, path);
    if (gap < 0) throw ConfigError(path + ".burst_gap_us: must be >= 0");
    Uniform iat{0, 1000};
    if (p.contains("extend_iat_us")) {
      const auto& r = p.at("extend_iat_us");
      if (!r.is_array() || r.size() != 2) throw ConfigError(path + ".extend_iat_us: expected [low, high]");
      iat = Uniform{jsonio::integer(r[0], path + ".extend_iat_us[0]"), jsonio::integer(r[1], path + ".extend_iat_us[1]")};
    }
    validate(iat, path + ".extend_iat_us");
    const auto b = families::budget(p, path);
    for (auto e : families::endpoints(p, {Endpoint::Middle}, path)) {
      add(families::burst_extend_machine(e, pe, max_extra, gap, iat, b));
    }
    return out;
  }
  if (cfg.name == "buflo") {
    BufloConfig bc;
    bc.slot = SimTime::us(jsonio::integer_or(p, "slot_us", bc.slot.count(), path));
    bc.min_duration = SimTime::from_seconds(jsonio::number_or(p, "min_duration_s", 10.0, path));
    const auto eps = families::endpoints(p, {Endpoint::Client, Endpoint::Middle}, path);
    bc.client = eps.count(Endpoint::Client) > 0;
    bc.middle = eps.count(Endpoint::Middle) > 0;
    bc.validate();
    out.buflo = bc;
    return out;
  }
  if (cfg.name == "custom") {
    const auto& ms = jsonio::require(p, "machines", path);
    if (!ms.is_array()) throw ConfigError(path + ".machines: expected an array");
    std::set<Endpoint> seen;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      auto m = machine_from_json(ms[i], path + ".machines[" + std::to_string(i) + "]");
      if (!seen.insert(m.endpoint).second) {
        throw ConfigError(path + ".machines[" + std::to_string(i) + "]: only one machine per endpoint");
      }
      add(std::move(m));
    }
    return out;
  }
  throw ConfigError("defense.name: unknown defense \"" + cfg.name + "\"");
}

inline DefenseConfig defense_config_from_json(const json& j, const std::string& path = "defense") {
  DefenseConfig c;
  if (j.is_string()) {
    c.name = j.get<std::string>();
    return c;
  }
  c.name = jsonio::string(jsonio::require(j, "name", path), path + ".name");
  c.label = jsonio::string_or(j, "label", "", path);
  if (j.contains("params")) c.params = j.at("params");
  c.failure_probability = jsonio::number_or(j, "failure_probability", 0.0, path);
  return c;
}

inline json to_json(const DefenseConfig& c) {
  return {{"name", c.name}, {"label", c.effective_label()}, {"params", c.params}, {"failure_probability", c.failure_probability}};
}

} // namespace padsim

#endif // PADSIM_DEFENSE_FAMILIES_HPP
