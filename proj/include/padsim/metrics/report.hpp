#ifndef PADSIM_METRICS_REPORT_HPP
#define PADSIM_METRICS_REPORT_HPP

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "padsim/metrics/csv.hpp"
#include "padsim/metrics/metrics.hpp"

namespace padsim {

/// Records pooled across every run of one defense configuration.
struct RecordGroup {
  std::string label;
  std::vector<DownloadRecord> records;

  std::vector<const DownloadRecord*> of_size(std::uint64_t size) const {
    std::vector<const DownloadRecord*> out;
    for (const auto& r : records) {
      if (r.size == size) out.push_back(&r);
    }
    return out;
  }
};

/// A metric indexed by row key, one optional value per group.
struct MetricTable {
  std::string key_column;
  std::string value_suffix;
  std::vector<std::string> labels;
  std::vector<std::string> keys;
  std::vector<std::vector<std::optional<double>>> values;  // [row][group]
  int decimals = 1;

  void write(const std::string& path) const {
    csv::Writer w(path);
    std::vector<std::string> header{key_column};
    for (const auto& l : labels) header.push_back(l + value_suffix);
    w.row(header);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      std::vector<std::string> row{keys[i]};
      for (const auto& v : values[i]) row.push_back(csv::fixed(v, decimals));
      w.row(row);
    }
    w.close();
  }
};

struct ReportOptions {
  std::uint64_t padding_bin_width = 200;
};

inline std::set<std::uint64_t> report_sizes(const std::vector<RecordGroup>& groups) {
  std::set<std::uint64_t> sizes;
  for (const auto& g : groups) {
    for (const auto& r : g.records) sizes.insert(r.size);
  }
  return sizes;
}

enum class ProgressMetric { TimeToByte, Overhead, Failure };

inline MetricTable progress_table(const std::vector<RecordGroup>& groups, std::uint64_t size, ProgressMetric metric) {
  MetricTable t;
  t.key_column = "kib_count";
  t.value_suffix = metric == ProgressMetric::TimeToByte ? "_time_ms"
                   : metric == ProgressMetric::Overhead ? "_bwoh_pct"
                                                         : "_failure_pct";
  std::vector<std::vector<const DownloadRecord*>> sets;
  for (const auto& g : groups) {
    t.labels.push_back(g.label);
    sets.push_back(g.of_size(size));
  }
  for (const auto& m : progress_grid(size)) {
    t.keys.push_back(m.kib_label());
    std::vector<std::optional<double>> row;
    for (const auto& s : sets) {
      switch (metric) {
        case ProgressMetric::TimeToByte: row.push_back(time_to_byte(s, m)); break;
        case ProgressMetric::Overhead: row.push_back(median_overhead(s, m)); break;
        case ProgressMetric::Failure: row.push_back(failure_rate(s, m)); break;
      }
    }
    t.values.push_back(std::move(row));
  }
  return t;
}

inline MetricTable padding_bin_table(const std::vector<RecordGroup>& groups, std::uint64_t size, std::uint64_t width) {
  MetricTable t;
  t.key_column = "padding_bin";
  t.value_suffix = "_failure_pct";
  std::vector<std::vector<PaddingBin>> per_group;
  std::set<std::uint64_t> lowers;
  for (const auto& g : groups) {
    t.labels.push_back(g.label);
    per_group.push_back(padding_failure_bins(g.of_size(size), width));
    for (const auto& b : per_group.back()) lowers.insert(b.lower);
  }
  for (auto lo : lowers) {
    t.keys.push_back(std::to_string(lo));
    std::vector<std::optional<double>> row;
    for (const auto& bins : per_group) {
      std::optional<double> v;
      for (const auto& b : bins) {
        if (b.lower == lo) v = b.failure_pct();
      }
      row.push_back(v);
    }
    t.values.push_back(std::move(row));
  }
  return t;
}

/// Writes every per-size report file into `dir`. Returns the file names.
inline std::vector<std::string> write_report(const std::vector<RecordGroup>& groups, const std::string& dir,
                                             const ReportOptions& opt = {}) {
  std::vector<std::string> files;
  for (auto size : report_sizes(groups)) {
    const auto s = size_label(size);
    auto emit = [&](const MetricTable& t, const std::string& name) {
      t.write(dir + "/" + name);
      files.push_back(name);
    };
    emit(progress_table(groups, size, ProgressMetric::TimeToByte), "ttb_" + s + ".csv");
    emit(progress_table(groups, size, ProgressMetric::Overhead), "pctb_" + s + ".csv");
    emit(progress_table(groups, size, ProgressMetric::Failure), "err_" + s + ".csv");
    emit(padding_bin_table(groups, size, opt.padding_bin_width), "pad_err_" + s + ".csv");

    csv::Writer sc(dir + "/scatter_" + s + ".csv");
    sc.row({"defense", "padding_count", "download_time_ms"});
    csv::Writer r2(dir + "/r2_" + s + ".csv");
    r2.row({"defense", "n", "r2"});
    for (const auto& g : groups) {
      const auto pts = padding_scatter(g.of_size(size));
      for (const auto& p : pts) sc.row({g.label, std::to_string(p.padding), csv::us_as_ms(p.time_us)});
      r2.row({g.label, std::to_string(pts.size()), csv::fixed(scatter_r_squared(pts), 4)});
    }
    sc.close();
    r2.close();
    files.push_back("scatter_" + s + ".csv");
    files.push_back("r2_" + s + ".csv");
  }
  return files;
}

} // namespace padsim

#endif // PADSIM_METRICS_REPORT_HPP
