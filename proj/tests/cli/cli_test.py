#!/usr/bin/env python3
"""End-to-end checks of the padsim command line.

usage: cli_test.py PADSIM_BINARY SOURCE_DIR WORK_DIR
"""
import csv
import json
import os
import shutil
import subprocess
import sys

PADSIM, SRC, WORK = sys.argv[1:4]
SMALL = os.path.join(SRC, "tests", "data", "small.json")
ORACLE = os.path.join(SRC, "tests", "oracle", "oracle_report.py")
failures = []


def padsim(*args, env=None, expect=0):
    e = dict(os.environ)
    e.pop("PADSIM_OUT", None)
    e.update(env or {})
    p = subprocess.run([PADSIM, *args], capture_output=True, text=True, env=e, cwd=WORK)
    if p.returncode != expect:
        failures.append(f"padsim {' '.join(args)}: exit {p.returncode}, wanted {expect}\n{p.stdout}{p.stderr}")
    return p


def check(ok, what):
    if not ok:
        failures.append(what)


def read(path):
    with open(path, "rb") as f:
        return f.read()


def header(path):
    with open(path, newline="") as f:
        return next(csv.reader(f))


def write_json(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f)


def test_validate():
    p = padsim("validate", "--scenario", SMALL)
    check(p.stdout.startswith("ok small scenario_hash="), "validate prints the scenario hash")
    doc = json.load(open(SMALL))
    doc["workload"]["bogus"] = 1
    write_json(os.path.join(WORK, "bad.json"), doc)
    p = padsim("validate", "--scenario", "bad.json", expect=1)
    check("workload.bogus" in p.stderr, "unknown field is named in the diagnostic")
    doc = json.load(open(SMALL))
    doc["defense"] = {"name": "adaptive_gap", "params": {"tokens": [-1]}}
    write_json(os.path.join(WORK, "bad2.json"), doc)
    p = padsim("validate", "--scenario", "bad2.json", expect=1)
    check("defense.params.tokens" in p.stderr, "invalid machine parameter is named")
    p = padsim("validate", "--scenario", SMALL, "--print-machines")
    check('"machines": []' in p.stdout, "control prints no machines")


def test_run_layout():
    padsim("run", "--scenario", SMALL, "--seeds", "1-2", env={"PADSIM_OUT": "envroot"})
    for seed in (1, 2):
        d = os.path.join(WORK, "envroot", "none", f"seed-{seed}")
        check(os.path.isfile(os.path.join(d, "manifest.json")), f"PADSIM_OUT root used for seed {seed}")
    d = os.path.join(WORK, "envroot", "none", "seed-1")
    check(header(os.path.join(d, "downloads.csv")) ==
          ["download_id", "client", "size_bytes", "start_us", "end_us", "status", "content_bytes", "padding_rx",
           "padding_tx"], "downloads.csv schema")
    check(header(os.path.join(d, "progress.csv")) == ["download_id", "time_us", "bytes", "padding_rx"],
          "progress.csv schema")
    check(b"\r" not in read(os.path.join(d, "downloads.csv")), "LF line endings")
    m = json.load(open(os.path.join(d, "manifest.json")))
    for key in ("scenario", "scenario_hash", "base_hash", "defense_hash", "seed", "tool_version", "overrides",
                "stats"):
        check(key in m, f"manifest has {key}")
    check(m["overrides"] == [{"field": "seeds", "value": [1, 2]}], "manifest records the seed override")
    with open(os.path.join(d, "downloads.csv"), newline="") as f:
        rows = list(csv.DictReader(f))
    check(len(rows) > 0 and all(int(r["start_us"]) >= 5000000 for r in rows), "warmup downloads excluded")


def test_determinism_and_manifest():
    padsim("run", "--scenario", SMALL, "--seed", "7", "--defense", "adaptive_gap", "--out", "a")
    padsim("run", "--scenario", SMALL, "--seed", "7", "--defense", "adaptive_gap", "--out", "b", "--workers", "2")
    src = os.path.join(WORK, "a", "adaptive_gap", "seed-7")
    padsim("run", "--manifest", os.path.join(src, "manifest.json"), "--out", "rerun")
    for f in ("downloads.csv", "progress.csv"):
        x = read(os.path.join(src, f))
        check(x == read(os.path.join(WORK, "b", "adaptive_gap", "seed-7", f)), f"{f} identical across runs")
        check(x == read(os.path.join(WORK, "rerun", f)), f"{f} identical after manifest rerun")


def test_report_and_oracle():
    padsim("run", "--scenario", SMALL, "--seeds", "1,2", "--out", "r")
    padsim("run", "--scenario", SMALL, "--seeds", "1,2", "--out", "r", "--defense",
           '{"name": "adaptive_gap", "label": "ag", "failure_probability": 0.01}')
    padsim("report", "r/none", "r/ag", "--out", "rep")
    rep = os.path.join(WORK, "rep")
    for s in ("50K", "100K"):
        for kind in ("ttb", "pctb", "err", "pad_err", "scatter", "r2"):
            check(os.path.isfile(os.path.join(rep, f"{kind}_{s}.csv")), f"{kind}_{s}.csv written")
    check(header(os.path.join(rep, "ttb_50K.csv")) == ["kib_count", "none_time_ms", "ag_time_ms"],
          "columns follow group order")
    with open(os.path.join(rep, "pctb_100K.csv")) as f:
        lines = f.read().splitlines()
    check(len(lines) == 101 and lines[-1].startswith("100.00,0.0,"), "100 progress rows, control 0.0")
    p = subprocess.run([sys.executable, ORACLE, rep], capture_output=True, text=True, cwd=WORK)
    check(p.returncode == 0, "oracle agrees with report: " + p.stdout.strip() + p.stderr.strip())

    doc = json.load(open(SMALL))
    doc["duration_s"] = 30
    write_json(os.path.join(WORK, "other.json"), doc)
    padsim("run", "--scenario", "other.json", "--out", "r2")
    p = padsim("report", "r/none", "r2/none", "--out", "mixed", expect=1)
    check("mixes scenarios" in p.stderr, "mixed scenarios under one label refused")
    padsim("run", "--scenario", "other.json", "--out", "r3", "--defense", "burst_extend")
    p = padsim("report", "r/none", "r3/burst_extend", "--out", "mixed2", expect=1)
    check("base scenario differs" in p.stderr, "groups over different base scenarios refused")


def test_trace_and_compare():
    padsim("trace", "gen", "--scenario", SMALL, "--seed", "1", "--out", "traces", "--limit", "10")
    check(header(os.path.join(WORK, "traces", "100K", os.listdir(os.path.join(WORK, "traces", "100K"))[0])) ==
          ["timestamp_us", "direction", "kind"], "trace schema")
    ag = '{"name": "adaptive_gap", "label": "ag", "failure_probability": 0.01}'
    padsim("trace", "apply", "--traces", "traces", "--defense", ag, "--out", "tr_ag")
    check(header(os.path.join(WORK, "tr_ag", "trace_summary.csv")) ==
          ["trace", "content_cells", "padding_cells", "bandwidth_pct", "latency_pct"], "trace summary schema")
    p = padsim("compare", "--trace-report", "tr_ag/trace_report.json", "--network-report", "rep")
    lines = p.stdout.splitlines()
    check(lines[0] == "defense,size,trace_latency_pct,network_ttlb_overhead_pct,control_ttlb_ms,defense_ttlb_ms",
          "compare header")
    check(all(l.split(",")[2] == "0.0" for l in lines[1:]) and len(lines) == 3, "padding-only trace latency 0.0")

    padsim("trace", "apply", "--traces", "traces", "--defense", "none", "--out", "tr_none")
    p = padsim("compare", "--trace-report", "tr_none/trace_report.json", "--network-report", "rep")
    check(all(l.split(",")[2:4] == ["0.0", "0.0"] for l in p.stdout.splitlines()[1:]), "none: both columns 0.0")

    other = '{"name": "adaptive_gap", "label": "ag", "params": {"tokens": [9]}, "failure_probability": 0.01}'
    padsim("trace", "apply", "--traces", "traces", "--defense", other, "--out", "tr_other")
    p = padsim("compare", "--trace-report", "tr_other/trace_report.json", "--network-report", "rep", expect=1)
    check("defense mismatch" in p.stderr, "different defense parameters refused")

    padsim("run", "--scenario", SMALL, "--seeds", "1,2", "--out", "r", "--defense",
           '{"name": "buflo", "params": {"slot_us": 5000, "min_duration_s": 1}}')
    padsim("report", "r/none", "r/buflo", "--out", "rep_bf")
    padsim("trace", "apply", "--traces", "traces", "--defense",
           '{"name": "buflo", "params": {"slot_us": 5000, "min_duration_s": 1}}', "--out", "tr_bf")
    p = padsim("compare", "--trace-report", "tr_bf/trace_report.json", "--network-report", "rep_bf")
    rows = [l.split(",") for l in p.stdout.splitlines()[1:]]
    check(rows and all(float(r[2]) > 0 and float(r[3]) > 0 for r in rows), "buflo: both columns positive")


def main():
    shutil.rmtree(WORK, ignore_errors=True)
    os.makedirs(WORK)
    for t in (test_validate, test_run_layout, test_determinism_and_manifest, test_report_and_oracle,
              test_trace_and_compare):
        before = len(failures)
        try:
            t()
        except Exception as e:  # a crash in one group should not hide the others
            failures.append(f"{t.__name__}: {type(e).__name__}: {e}")
        print(("ok   " if len(failures) == before else "FAIL ") + t.__name__)
    for f in failures:
        print("  " + f)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
