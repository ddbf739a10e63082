#ifndef PADSIM_DEFENSE_JSON_IO_HPP
#define PADSIM_DEFENSE_JSON_IO_HPP

#include <string>

#include "json.hpp"
#include "padsim/defense/machine.hpp"
#include "padsim/sim/distribution.hpp"
#include "padsim/sim/errors.hpp"

namespace padsim {

using json = nlohmann::json;

namespace jsonio {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key + ": missing");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline std::int64_t integer(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v == static_cast<double>(static_cast<std::int64_t>(v))) return static_cast<std::int64_t>(v);
  }
  throw ConfigError(path + ": expected an integer");
}

inline double number_or(const json& j, const std::string& key, double def, const std::string& path) {
  if (!j.contains(key) || j.at(key).is_null()) return def;
  return number(j.at(key), path + "." + key);
}

inline std::int64_t integer_or(const json& j, const std::string& key, std::int64_t def, const std::string& path) {
  if (!j.contains(key) || j.at(key).is_null()) return def;
  return integer(j.at(key), path + "." + key);
}

inline bool boolean_or(const json& j, const std::string& key, bool def, const std::string& path) {
  if (!j.contains(key) || j.at(key).is_null()) return def;
  if (!j.at(key).is_boolean()) throw ConfigError(path + "." + key + ": expected true/false");
  return j.at(key).get<bool>();
}

inline std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

inline std::string string_or(const json& j, const std::string& key, const std::string& def, const std::string& path) {
  if (!j.contains(key) || j.at(key).is_null()) return def;
  return string(j.at(key), path + "." + key);
}

inline Endpoint endpoint(const json& j, const std::string& path) {
  const auto s = string(j, path);
  if (s == "client") return Endpoint::Client;
  if (s == "middle") return Endpoint::Middle;
  throw ConfigError(path + ": endpoint must be \"client\" or \"middle\", got \"" + s + "\"");
}

inline Direction direction(const json& j, const std::string& path) {
  const auto s = string(j, path);
  if (s == "client_bound") return Direction::ClientBound;
  if (s == "server_bound") return Direction::ServerBound;
  throw ConfigError(path + ": direction must be \"client_bound\" or \"server_bound\"");
}

} // namespace jsonio

inline Distribution distribution_from_json(const json& j, const std::string& path) {
  using namespace jsonio;
  const auto type = string(require(j, "type", path), path + ".type");
  Distribution d;
  if (type == "uniform") {
    d = Uniform{integer(require(j, "low", path), path + ".low"), integer(require(j, "high", path), path + ".high")};
  } else if (type == "lognormal") {
    d = LogNormal{number(require(j, "mu", path), path + ".mu"), number(require(j, "sigma", path), path + ".sigma")};
  } else if (type == "geometric") {
    Geometric g{number(require(j, "p", path), path + ".p"), std::nullopt};
    if (j.contains("max") && !j.at("max").is_null()) g.max = integer(j.at("max"), path + ".max");
    d = g;
  } else if (type == "exponential") {
    d = Exponential{number(require(j, "mean", path), path + ".mean")};
  } else if (type == "histogram") {
    Histogram h;
    const auto& edges = require(j, "edges", path);
    const auto& tokens = require(j, "tokens", path);
    if (!edges.is_array() || !tokens.is_array()) throw ConfigError(path + ": edges/tokens must be arrays");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      h.edges.push_back(integer(edges[i], path + ".edges[" + std::to_string(i) + "]"));
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto t = integer(tokens[i], path + ".tokens[" + std::to_string(i) + "]");
      if (t < 0) throw ConfigError(path + ".tokens[" + std::to_string(i) + "]: must be >= 0");
      h.tokens.push_back(static_cast<std::uint32_t>(t));
    }
    const auto inf = integer_or(j, "infinity_tokens", 0, path);
    if (inf < 0) throw ConfigError(path + ".infinity_tokens: must be >= 0");
    h.infinity_tokens = static_cast<std::uint32_t>(inf);
    h.token_removal = boolean_or(j, "token_removal", true, path);
    d = h;
  } else {
    throw ConfigError(path + ".type: unknown distribution \"" + type + "\"");
  }
  validate(d, path);
  return d;
}

inline json to_json(const Distribution& d) {
  if (auto* u = std::get_if<Uniform>(&d)) return {{"type", "uniform"}, {"low", u->low}, {"high", u->high}};
  if (auto* l = std::get_if<LogNormal>(&d)) return {{"type", "lognormal"}, {"mu", l->mu}, {"sigma", l->sigma}};
  if (auto* g = std::get_if<Geometric>(&d)) {
    json j{{"type", "geometric"}, {"p", g->p}};
    if (g->max) j["max"] = *g->max;
    return j;
  }
  if (auto* e = std::get_if<Exponential>(&d)) return {{"type", "exponential"}, {"mean", e->mean}};
  const auto& h = std::get<Histogram>(d);
  return {{"type", "histogram"},
          {"edges", h.edges},
          {"tokens", h.tokens},
          {"infinity_tokens", h.infinity_tokens},
          {"token_removal", h.token_removal}};
}

inline MachineSpec machine_from_json(const json& j, const std::string& path) {
  using namespace jsonio;
  MachineSpec m;
  m.name = string_or(j, "name", "machine", path);
  m.endpoint = endpoint(require(j, "endpoint", path), path + ".endpoint");
  m.allowed_on = j.contains("allowed_on") ? direction(j.at("allowed_on"), path + ".allowed_on")
                                          : padding_direction(m.endpoint);
  m.start_state = string(require(j, "start_state", path), path + ".start_state");
  if (j.contains("budget") && !j.at("budget").is_null()) {
    const auto b = integer(j.at("budget"), path + ".budget");
    if (b < 0) throw ConfigError(path + ".budget: must be >= 0");
    m.budget = static_cast<std::uint64_t>(b);
  }
  const auto& states = require(j, "states", path);
  if (!states.is_array()) throw ConfigError(path + ".states: expected an array");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto sp = path + ".states[" + std::to_string(i) + "]";
    const auto& sj = states[i];
    StateSpec st;
    st.id = string(require(sj, "id", sp), sp + ".id");
    if (sj.contains("iat") && !sj.at("iat").is_null()) st.iat = distribution_from_json(sj.at("iat"), sp + ".iat");
    if (sj.contains("length") && !sj.at("length").is_null()) {
      st.length = distribution_from_json(sj.at("length"), sp + ".length");
    }
    if (sj.contains("transitions")) {
      const auto& tj = sj.at("transitions");
      if (!tj.is_object()) throw ConfigError(sp + ".transitions: expected an object");
      for (const auto& [k, v] : tj.items()) {
        Trigger t;
        if (!parse_trigger(k, t)) throw ConfigError(sp + ".transitions." + k + ": unknown trigger");
        st.transitions[t] = string(v, sp + ".transitions." + k);
      }
    }
    m.states.push_back(std::move(st));
  }
  return m;
}

inline json to_json(const MachineSpec& m) {
  json states = json::array();
  for (const auto& st : m.states) {
    json sj{{"id", st.id}};
    if (st.iat) sj["iat"] = to_json(*st.iat);
    if (st.length) sj["length"] = to_json(*st.length);
    json tr = json::object();
    for (const auto& [t, target] : st.transitions) tr[to_string(t)] = target;
    sj["transitions"] = tr;
    states.push_back(sj);
  }
  json j{{"name", m.name},
         {"endpoint", to_string(m.endpoint)},
         {"allowed_on", to_string(m.allowed_on)},
         {"start_state", m.start_state},
         {"states", states}};
  j["budget"] = m.budget ? json(*m.budget) : json(nullptr);
  return j;
}

} // namespace padsim

#endif // PADSIM_DEFENSE_JSON_IO_HPP
