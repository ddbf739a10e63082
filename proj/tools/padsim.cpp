#include <charconv>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "padsim/app/analysis.hpp"

using namespace padsim;

namespace {

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError(what + ": not a non-negative integer: '" + s + "'");
  return v;
}

/// "1,2,5" or "1-5" or a mix: "1-3,7".
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_u64(part, "--seeds"));
      continue;
    }
    const auto lo = parse_u64(part.substr(0, dash), "--seeds");
    const auto hi = parse_u64(part.substr(dash + 1), "--seeds");
    if (hi < lo) throw ConfigError("--seeds: empty range '" + part + "'");
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--seeds: no seeds given");
  return out;
}

/// A bare family name or an inline JSON defense object.
DefenseConfig parse_defense(const std::string& s) {
  if (!s.empty() && s.front() == '{') {
    try {
      return defense_config_from_json(json::parse(s), "--defense");
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("--defense: ") + e.what());
    }
  }
  return defense_config_from_json(json(s), "--defense");
}

struct Common {
  std::string scenario;
  std::string seed;
  std::string seeds;
  std::string defense;
  std::string out;
  double duration = 0.0;
  unsigned workers = 1;
};

/// Loads the scenario and applies command-line overrides, recording each.
Scenario load_with_overrides(const Common& c, json& overrides) {
  auto j = [&] {
    std::ifstream in(c.scenario);
    if (!in) throw ConfigError("cannot read scenario file " + c.scenario);
    try {
      return json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(c.scenario + ": " + e.what());
    }
  }();
  auto sc = scenario_from_json(j);
  if (!c.defense.empty()) {
    sc.defense = parse_defense(c.defense);
    make_defense(sc.defense);
    overrides.push_back({{"field", "defense"}, {"value", to_json(sc.defense)}});
  }
  if (c.duration > 0.0) {
    j = to_json(sc);
    j["duration_s"] = c.duration;
    sc = scenario_from_json(j);
    overrides.push_back({{"field", "duration_s"}, {"value", c.duration}});
  }
  if (!c.seed.empty() && !c.seeds.empty()) throw ConfigError("--seed and --seeds are mutually exclusive");
  if (!c.seed.empty()) sc.seeds = {parse_u64(c.seed, "--seed")};
  if (!c.seeds.empty()) sc.seeds = parse_seeds(c.seeds);
  if (!c.seed.empty() || !c.seeds.empty()) overrides.push_back({{"field", "seeds"}, {"value", sc.seeds}});
  return sc;
}

int report_runs(const std::vector<RunSummary>& runs) {
  int rc = 0;
  for (const auto& r : runs) {
    if (r.ok) {
      const auto& st = r.stats;
      std::cout << r.dir << ": " << st["downloads_measured"].get<std::uint64_t>() << " downloads, max relay utilization "
                << st["max_relay_utilization"].get<double>() << ", events " << st["event_log_hash"].get<std::string>()
                << "\n";
    } else {
      std::cerr << "error: " << r.dir << ": " << r.error << "\n";
      rc = 2;
    }
  }
  return rc;
}

void add_common(CLI::App* cmd, Common& c, bool run_flags) {
  cmd->add_option("--scenario", c.scenario, "scenario JSON file");
  cmd->add_option("--seed", c.seed, "single seed (overrides the scenario)");
  cmd->add_option("--seeds", c.seeds, "seed list, e.g. 1,2,3 or 1-5");
  cmd->add_option("--defense", c.defense, "defense family name or inline JSON object");
  cmd->add_option("--out", c.out, "output directory (default $PADSIM_OUT)");
  if (run_flags) {
    cmd->add_option("--duration", c.duration, "simulated seconds (overrides the scenario)");
    cmd->add_option("--workers", c.workers, "parallel runs")->check(CLI::PositiveNumber);
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"padsim: circuit padding simulator"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common run_c;
  bool events = false;
  std::string manifest;
  auto* run = app.add_subcommand("run", "simulate a scenario for each seed");
  add_common(run, run_c, true);
  run->add_flag("--events", events, "write the dispatched event log");
  run->add_option("--manifest", manifest, "rerun the run recorded in a manifest.json");

  std::vector<std::string> report_in;
  std::string report_out;
  std::uint64_t bin_width = 200;
  auto* report = app.add_subcommand("report", "aggregate run directories into metric tables");
  report->add_option("runs", report_in, "run directories (searched recursively)")->required();
  report->add_option("--out", report_out, "report directory")->required();
  report->add_option("--bin-width", bin_width, "padding-count bin width")->check(CLI::PositiveNumber);

  auto* trace = app.add_subcommand("trace", "trace-mode evaluation");
  trace->require_subcommand(1);
  Common gen_c;
  std::uint64_t gen_size = 0;
  std::size_t gen_limit = 0;
  auto* gen = trace->add_subcommand("gen", "capture client-side traces from a control run");
  add_common(gen, gen_c, true);
  gen->add_option("--size", gen_size, "only downloads of this many bytes");
  gen->add_option("--limit", gen_limit, "at most this many traces per size");
  Common apply_c;
  std::string traces_in;
  auto* apply = trace->add_subcommand("apply", "apply a defense to a directory of traces");
  add_common(apply, apply_c, false);
  apply->add_option("--traces", traces_in, "input trace directory")->required();

  std::string trace_report, network_report, compare_out, defense_label, control_label = "none";
  auto* compare = app.add_subcommand("compare", "trace-mode vs network-mode overhead");
  compare->add_option("--trace-report", trace_report, "trace_report.json")->required();
  compare->add_option("--network-report", network_report, "report directory or its groups.json")->required();
  compare->add_option("--defense", defense_label, "expected defense label");
  compare->add_option("--control", control_label, "control group label");
  compare->add_option("--out", compare_out, "CSV file (default stdout)");

  std::string validate_path;
  bool print_machines = false;
  auto* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("--scenario", validate_path, "scenario JSON file")->required();
  validate->add_flag("--print-machines", print_machines, "print the compiled defense");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (!manifest.empty()) {
        if (run_c.out.empty()) throw ConfigError("--manifest requires --out");
        auto spec = spec_from_manifest(manifest, run_c.out);
        spec.events_log = events;
        return report_runs({execute_run(spec)});
      }
      if (run_c.scenario.empty()) throw ConfigError("--scenario is required");
      json overrides = json::array();
      const auto sc = load_with_overrides(run_c, overrides);
      const auto root = resolve_out_root(run_c.out, sc);
      return report_runs(execute_runs(plan_runs(sc, root, overrides, events), run_c.workers));
    }
    if (*report) {
      ReportOptions opt;
      opt.padding_bin_width = bin_width;
      for (const auto& f : run_report(report_in, report_out, opt)) std::cout << report_out << "/" << f << "\n";
      return 0;
    }
    if (*gen) {
      if (gen_c.scenario.empty()) throw ConfigError("--scenario is required");
      if (gen_c.out.empty()) throw ConfigError("--out is required");
      if (!gen_c.defense.empty()) throw ConfigError("trace gen always uses the control defense; drop --defense");
      json overrides = json::array();
      const auto sc = load_with_overrides(gen_c, overrides);
      const auto files = generate_traces(sc, sc.seeds.front(), gen_c.out,
                                         gen_size ? std::optional<std::uint64_t>(gen_size) : std::nullopt, gen_limit);
      std::cout << files.size() << " traces written to " << gen_c.out << "\n";
      return 0;
    }
    if (*apply) {
      if (apply_c.out.empty()) throw ConfigError("--out is required");
      DefenseConfig cfg;
      if (!apply_c.defense.empty()) {
        cfg = parse_defense(apply_c.defense);
      } else if (!apply_c.scenario.empty()) {
        cfg = load_scenario(apply_c.scenario).defense;
      } else {
        throw ConfigError("trace apply needs --defense or --scenario");
      }
      const auto seed = apply_c.seed.empty() ? std::uint64_t{1} : parse_u64(apply_c.seed, "--seed");
      const auto rep = apply_defense_to_traces(traces_in, cfg, seed, apply_c.out);
      std::cout << rep["traces"].get<std::size_t>() << " traces, median latency overhead "
                << csv::fixed(json_opt(rep, "median_latency_pct"), 1) << "%, median bandwidth overhead "
                << csv::fixed(json_opt(rep, "median_bandwidth_pct"), 1) << "%\n";
      return 0;
    }
    if (*compare) {
      const auto tr = read_json(trace_report);
      if (!defense_label.empty() && tr.value("label", "") != defense_label) {
        throw ConfigError("defense mismatch: trace report is for '" + tr.value("label", "") + "', not '" +
                          defense_label + "'");
      }
      auto groups_path = network_report;
      if (fs::is_directory(groups_path)) groups_path += "/groups.json";
      const auto rows = compare_reports(tr, read_json(groups_path), control_label);
      if (compare_out.empty()) {
        std::cout << "defense,size,trace_latency_pct,network_ttlb_overhead_pct,control_ttlb_ms,defense_ttlb_ms\n";
        for (const auto& r : rows) {
          std::cout << r.defense << "," << r.size << "," << csv::fixed(r.trace_latency_pct, 1) << ","
                    << csv::fixed(r.network_overhead_pct, 1) << "," << csv::fixed(r.control_ms, 1) << ","
                    << csv::fixed(r.defense_ms, 1) << "\n";
        }
      } else {
        write_compare(rows, compare_out);
      }
      return 0;
    }
    if (*validate) {
      const auto sc = load_scenario(validate_path);
      std::cout << "ok " << sc.name << " scenario_hash=" << scenario_hash(sc) << " base_hash=" << base_hash(sc)
                << " defense_hash=" << defense_hash(sc.defense) << "\n";
      if (print_machines) {
        const auto spec = make_defense(sc.defense);
        json m = json::array();
        for (const auto& cm : spec.machines) m.push_back(to_json(cm->spec()));
        json out{{"defense", spec.name}, {"label", spec.label}, {"machines", m}};
        if (spec.buflo) {
          out["buflo"] = {{"slot_us", spec.buflo->slot.count()},
                          {"min_duration_s", static_cast<double>(spec.buflo->min_duration.count()) / 1e6},
                          {"client", spec.buflo->client},
                          {"middle", spec.buflo->middle}};
        }
        std::cout << out.dump(2) << "\n";
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
