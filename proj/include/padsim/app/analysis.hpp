#ifndef PADSIM_APP_ANALYSIS_HPP
#define PADSIM_APP_ANALYSIS_HPP

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "padsim/app/runner.hpp"
#include "padsim/metrics/report.hpp"
#include "padsim/trace/trace.hpp"

namespace padsim {

namespace fs = std::filesystem;

// ---- report ---------------------------------------------------------------

/// Every directory holding a manifest.json under the given paths, in sorted
/// order per argument.
inline std::vector<std::string> find_run_dirs(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw ConfigError("run directory not found: " + p);
    if (fs::exists(fs::path(p) / "manifest.json")) {
      out.push_back(p);
      continue;
    }
    std::vector<std::string> found;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file() && e.path().filename() == "manifest.json") found.push_back(e.path().parent_path().string());
    }
    std::sort(found.begin(), found.end());
    if (found.empty()) throw ConfigError(p + ": no manifest.json found");
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

struct GroupInfo {
  std::string label;
  std::string defense;
  std::string scenario_hash;
  std::string defense_hash;
  std::string base_hash;
  std::vector<std::string> runs;
  std::vector<std::uint64_t> seeds;
};

struct LoadedGroups {
  std::vector<RecordGroup> groups;
  std::vector<GroupInfo> info;
};

/// Pools runs by label. Runs under one label must share a scenario hash and
/// all groups must share a base hash.
inline LoadedGroups load_groups(const std::vector<std::string>& run_dirs) {
  LoadedGroups out;
  std::map<std::string, std::size_t> index;
  for (const auto& dir : run_dirs) {
    const auto m = read_json(dir + "/manifest.json");
    const auto where = dir + "/manifest.json";
    const auto label = jsonio::string(jsonio::require(m, "label", where), "label");
    const auto sh = jsonio::string(jsonio::require(m, "scenario_hash", where), "scenario_hash");
    const auto bh = jsonio::string(jsonio::require(m, "base_hash", where), "base_hash");
    auto it = index.find(label);
    if (it == index.end()) {
      if (!out.info.empty() && out.info.front().base_hash != bh) {
        throw ConfigError(dir + ": base scenario differs from " + out.info.front().runs.front() +
                          " (groups must differ only in defense)");
      }
      it = index.emplace(label, out.groups.size()).first;
      out.groups.push_back({label, {}});
      GroupInfo g;
      g.label = label;
      g.defense = m.value("defense", "");
      g.scenario_hash = sh;
      g.defense_hash = m.value("defense_hash", "");
      g.base_hash = bh;
      out.info.push_back(g);
    }
    auto& info = out.info[it->second];
    if (info.scenario_hash != sh) {
      throw ConfigError(dir + ": label '" + label + "' mixes scenarios (" + info.scenario_hash + " vs " + sh + ")");
    }
    info.runs.push_back(dir);
    info.seeds.push_back(m.value("seed", std::uint64_t{0}));
    auto recs = read_records(dir);
    auto& pooled = out.groups[it->second].records;
    pooled.insert(pooled.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  if (out.groups.empty()) throw ConfigError("report: no runs given");
  return out;
}

/// Median time to the last byte per size, in ms, per group.
inline json ttlb_summary(const RecordGroup& g) {
  json out = json::object();
  for (auto size : report_sizes({g})) {
    const auto grid = progress_grid(size);
    const auto v = time_to_byte(g.of_size(size), grid.back());
    out[size_label(size)] = v ? json(*v) : json(nullptr);
  }
  return out;
}

inline std::vector<std::string> run_report(const std::vector<std::string>& paths, const std::string& out_dir,
                                           const ReportOptions& opt) {
  const auto loaded = load_groups(find_run_dirs(paths));
  fs::create_directories(out_dir);
  auto files = write_report(loaded.groups, out_dir, opt);
  json groups = json::array();
  for (std::size_t i = 0; i < loaded.groups.size(); ++i) {
    const auto& g = loaded.info[i];
    groups.push_back({{"label", g.label},
                      {"defense", g.defense},
                      {"scenario_hash", g.scenario_hash},
                      {"defense_hash", g.defense_hash},
                      {"base_hash", g.base_hash},
                      {"runs", g.runs},
                      {"seeds", g.seeds},
                      {"downloads", loaded.groups[i].records.size()},
                      {"ttlb_ms", ttlb_summary(loaded.groups[i])}});
  }
  const json doc{{"tool_version", kToolVersion}, {"padding_bin_width", opt.padding_bin_width}, {"groups", groups}};
  std::ofstream(out_dir + "/groups.json", std::ios::binary) << doc.dump(2) << '\n';
  files.push_back("groups.json");
  return files;
}

// ---- traces ---------------------------------------------------------------

/// Client-side traces of successful, measured downloads from a control run of
/// the scenario. Times are relative to the download start.
inline std::vector<std::string> generate_traces(Scenario sc, std::uint64_t seed, const std::string& out_dir,
                                                std::optional<std::uint64_t> only_size, std::size_t limit) {
  sc.defense = DefenseConfig{};
  RunOptions opt;
  opt.capture_traces = true;
  const auto r = Simulation(sc, seed, opt).run();
  std::vector<std::string> files;
  std::map<std::uint64_t, std::size_t> per_size;
  for (const auto* d : r.measured()) {
    if (!d->succeeded() || (only_size && d->size != *only_size)) continue;
    if (limit && per_size[d->size] >= limit) continue;
    ++per_size[d->size];
    std::vector<TraceCell> cells;
    for (const auto& o : d->observed) cells.push_back({o.at - d->start, o.dir, CellKind::Content});
    const auto rel = size_label(d->size) + "/d" + std::to_string(d->id) + ".csv";
    fs::create_directories(fs::path(out_dir) / size_label(d->size));
    write_trace(out_dir + "/" + rel, cells);
    files.push_back(rel);
  }
  return files;
}

inline std::vector<std::string> find_traces(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("trace directory not found: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), dir).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline json median_or_null(std::vector<double> v) { return v.empty() ? json(nullptr) : json(median(std::move(v))); }

/// Applies a defense to every trace under `in_dir`. Trace i uses seed + i.
/// Traces in a subdirectory are summarized under that subdirectory's name.
inline json apply_defense_to_traces(const std::string& in_dir, const DefenseConfig& cfg, std::uint64_t seed,
                                    const std::string& out_dir) {
  const auto spec = make_defense(cfg);
  const auto traces = find_traces(in_dir);
  if (traces.empty()) throw ConfigError(in_dir + ": no trace files");
  fs::create_directories(out_dir);
  csv::Writer summary(out_dir + "/trace_summary.csv");
  summary.row({"trace", "content_cells", "padding_cells", "bandwidth_pct", "latency_pct"});
  std::vector<double> lat, bw;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_group;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& rel = traces[i];
    const auto orig = read_trace(in_dir + "/" + rel);
    const auto def = apply_defense_to_trace(orig, spec, seed + i);
    const auto o = trace_overheads(orig, def);
    const auto dst = fs::path(out_dir) / "defended" / rel;
    fs::create_directories(dst.parent_path());
    write_trace(dst.string(), def);
    summary.row({rel, std::to_string(o.content), std::to_string(o.padding), csv::fixed(o.bandwidth_pct, 1),
                 csv::fixed(o.latency_pct, 1)});
    const auto parent = fs::path(rel).parent_path().string();
    auto& grp = by_group[parent.empty() ? "all" : parent];
    if (o.latency_pct) {
      lat.push_back(*o.latency_pct);
      grp.first.push_back(*o.latency_pct);
    }
    if (o.bandwidth_pct) {
      bw.push_back(*o.bandwidth_pct);
      grp.second.push_back(*o.bandwidth_pct);
    }
  }
  summary.close();
  json groups = json::object();
  for (auto& [name, v] : by_group) {
    groups[name] = {{"traces", v.first.size()},
                    {"median_latency_pct", median_or_null(v.first)},
                    {"median_bandwidth_pct", median_or_null(v.second)}};
  }
  const json report{{"tool_version", kToolVersion},
                    {"label", cfg.effective_label()},
                    {"defense", to_json(cfg)},
                    {"defense_hash", defense_hash(cfg)},
                    {"padding_only", spec.padding_only()},
                    {"seed", seed},
                    {"traces", traces.size()},
                    {"median_latency_pct", median_or_null(lat)},
                    {"median_bandwidth_pct", median_or_null(bw)},
                    {"by_size", groups}};
  std::ofstream(out_dir + "/trace_report.json", std::ios::binary) << report.dump(2) << '\n';
  return report;
}

// ---- compare --------------------------------------------------------------

struct CompareRow {
  std::string defense;
  std::string size;
  std::optional<double> trace_latency_pct;
  std::optional<double> network_overhead_pct;
  std::optional<double> control_ms;
  std::optional<double> defense_ms;
};

/// Bytes denoted by a size label ("50K", "1M", "512B"); unknown labels sort last.
inline std::uint64_t size_label_order(const std::string& label) {
  if (label.empty()) return UINT64_MAX;
  std::uint64_t n = 0;
  std::size_t i = 0;
  for (; i < label.size() && std::isdigit(static_cast<unsigned char>(label[i])); ++i) n = n * 10 + (label[i] - '0');
  const auto unit = label.substr(i);
  if (unit == "M") return n * 1048576;
  if (unit == "K") return n * 1024;
  if (unit == "B") return n;
  return UINT64_MAX;
}

inline std::optional<double> json_opt(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

/// Trace-mode latency overhead next to the network-mode change in median
/// time to last byte, per size. Refuses reports of different defenses.
inline std::vector<CompareRow> compare_reports(const json& trace_report, const json& groups_doc,
                                               const std::string& control_label) {
  const auto label = jsonio::string(jsonio::require(trace_report, "label", "trace report"), "label");
  const auto th = jsonio::string(jsonio::require(trace_report, "defense_hash", "trace report"), "defense_hash");
  const json* def = nullptr;
  const json* ctl = nullptr;
  for (const auto& g : jsonio::require(groups_doc, "groups", "network report")) {
    if (g.value("label", "") == label) def = &g;
    if (g.value("label", "") == control_label) ctl = &g;
  }
  if (!def) throw ConfigError("network report: no group labelled '" + label + "'");
  if (!ctl) throw ConfigError("network report: no control group labelled '" + control_label + "'");
  if (def->value("defense_hash", "") != th) {
    throw ConfigError("defense mismatch: trace report " + th + " vs network group '" + label + "' " +
                      def->value("defense_hash", ""));
  }
  std::vector<CompareRow> rows;
  const auto& dt = def->at("ttlb_ms");
  const auto& ct = ctl->at("ttlb_ms");
  const auto& by_size = trace_report.value("by_size", json::object());
  for (const auto& [size, _] : dt.items()) {
    CompareRow r;
    r.defense = label;
    r.size = size;
    r.trace_latency_pct = by_size.contains(size) ? json_opt(by_size.at(size), "median_latency_pct")
                                                 : json_opt(trace_report, "median_latency_pct");
    r.defense_ms = json_opt(dt, size);
    r.control_ms = json_opt(ct, size);
    if (r.defense_ms && r.control_ms && *r.control_ms > 0.0) {
      r.network_overhead_pct = 100.0 * (*r.defense_ms - *r.control_ms) / *r.control_ms;
    }
    rows.push_back(r);
  }
  std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return size_label_order(a.size) < size_label_order(b.size); });
  return rows;
}

inline void write_compare(const std::vector<CompareRow>& rows, const std::string& path) {
  csv::Writer w(path);
  w.row({"defense", "size", "trace_latency_pct", "network_ttlb_overhead_pct", "control_ttlb_ms", "defense_ttlb_ms"});
  for (const auto& r : rows) {
    w.row({r.defense, r.size, csv::fixed(r.trace_latency_pct, 1), csv::fixed(r.network_overhead_pct, 1),
           csv::fixed(r.control_ms, 1), csv::fixed(r.defense_ms, 1)});
  }
  w.close();
}

} // namespace padsim

#endif // PADSIM_APP_ANALYSIS_HPP
