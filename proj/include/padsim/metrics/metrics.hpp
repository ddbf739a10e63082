#ifndef PADSIM_METRICS_METRICS_HPP
#define PADSIM_METRICS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "padsim/workload/workload.hpp"

namespace padsim {

/// A point on a download's progress axis: k percent of the size class.
/// Reached when bytes * 100 >= size * k.
struct ProgressMark {
  std::uint64_t size = 0;
  std::uint32_t pct = 100;

  bool reached_by(std::uint64_t bytes) const { return bytes * 100 >= size * pct; }
  /// KiB at this mark, as a string with two decimals (half-up).
  std::string kib_label() const {
    const auto hundredths = (size * pct * 2 + 1024) / 2048;
    auto frac = std::to_string(hundredths % 100);
    return std::to_string(hundredths / 100) + "." + std::string(2 - frac.size(), '0') + frac;
  }
};

/// Marks at every 1% of the size class; the last one is the final byte.
inline std::vector<ProgressMark> progress_grid(std::uint64_t size) {
  std::vector<ProgressMark> out;
  for (std::uint32_t k = 1; k <= 100; ++k) out.push_back({size, k});
  return out;
}

/// First progress entry at which the mark is reached.
inline const ProgressEntry* entry_at(const DownloadRecord& r, const ProgressMark& m) {
  for (const auto& e : r.progress) {
    if (m.reached_by(e.bytes)) return &e;
  }
  return nullptr;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

/// Padding bytes received, as a percentage of content bytes, when content
/// first reached the mark. Absent if the mark was never reached.
inline std::optional<double> overhead_at(const DownloadRecord& r, const ProgressMark& m) {
  const auto* e = entry_at(r, m);
  if (!e || e->bytes == 0) return std::nullopt;
  return 100.0 * static_cast<double>(e->padding_rx * kCellSize) / static_cast<double>(e->bytes);
}

/// Elapsed microseconds from start until the mark.
inline std::optional<std::int64_t> elapsed_to(const DownloadRecord& r, const ProgressMark& m) {
  const auto* e = entry_at(r, m);
  if (!e) return std::nullopt;
  return (e->at - r.start).count();
}

/// Median overhead over successful records.
inline std::optional<double> median_overhead(const std::vector<const DownloadRecord*>& rs, const ProgressMark& m) {
  std::vector<double> v;
  for (const auto* r : rs) {
    if (!r->succeeded()) continue;
    if (auto o = overhead_at(*r, m)) v.push_back(*o);
  }
  if (v.empty()) return std::nullopt;
  return median(std::move(v));
}

/// Median time-to-byte in ms over successful records.
inline std::optional<double> time_to_byte(const std::vector<const DownloadRecord*>& rs, const ProgressMark& m) {
  std::vector<double> v;
  for (const auto* r : rs) {
    if (!r->succeeded()) continue;
    if (auto t = elapsed_to(*r, m)) v.push_back(static_cast<double>(*t));
  }
  if (v.empty()) return std::nullopt;
  return median(std::move(v)) / 1000.0;
}

/// Percentage of attempted downloads that never reached the mark.
inline std::optional<double> failure_rate(const std::vector<const DownloadRecord*>& rs, const ProgressMark& m) {
  if (rs.empty()) return std::nullopt;
  std::size_t reached = 0;
  for (const auto* r : rs) {
    if (entry_at(*r, m)) ++reached;
  }
  return 100.0 * static_cast<double>(rs.size() - reached) / static_cast<double>(rs.size());
}

struct ScatterPoint {
  std::uint64_t padding = 0;
  std::int64_t time_us = 0;
};

/// One point per successful record: total padding cells vs download time.
inline std::vector<ScatterPoint> padding_scatter(const std::vector<const DownloadRecord*>& rs) {
  std::vector<ScatterPoint> out;
  for (const auto* r : rs) {
    if (r->succeeded() && r->end) out.push_back({r->padding_total(), (*r->end - r->start).count()});
  }
  return out;
}

/// Ordinary least-squares R^2 of y on x. Zero-variance regressor gives 0,
/// zero-variance response gives 1, fewer than two points is absent.
inline std::optional<double> r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = x.size();
  if (n < 2 || y.size() != n) return std::nullopt;
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) return 0.0;
  if (syy == 0.0) return 1.0;
  return (sxy * sxy) / (sxx * syy);
}

inline std::optional<double> scatter_r_squared(const std::vector<ScatterPoint>& pts) {
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(static_cast<double>(p.padding));
    y.push_back(static_cast<double>(p.time_us) / 1000.0);
  }
  return r_squared(x, y);
}

struct PaddingBin {
  std::uint64_t lower = 0;  // inclusive lower edge, in padding cells
  std::uint64_t attempted = 0;
  std::uint64_t failed = 0;

  double failure_pct() const { return 100.0 * static_cast<double>(failed) / static_cast<double>(attempted); }
};

/// Failure percentage per bin of total padding cells (sent + received).
/// Empty bins are omitted.
inline std::vector<PaddingBin> padding_failure_bins(const std::vector<const DownloadRecord*>& rs,
                                                    std::uint64_t width) {
  if (width == 0) throw ConfigError("padding bin width must be > 0");
  std::map<std::uint64_t, PaddingBin> bins;
  for (const auto* r : rs) {
    const auto lo = r->padding_total() / width * width;
    auto& b = bins[lo];
    b.lower = lo;
    ++b.attempted;
    if (!r->succeeded()) ++b.failed;
  }
  std::vector<PaddingBin> out;
  for (auto& [k, b] : bins) out.push_back(b);
  return out;
}

inline std::string size_label(std::uint64_t size) {
  if (size % 1048576 == 0) return std::to_string(size / 1048576) + "M";
  if (size % 1024 == 0) return std::to_string(size / 1024) + "K";
  return std::to_string(size) + "B";
}

} // namespace padsim

#endif // PADSIM_METRICS_METRICS_HPP
