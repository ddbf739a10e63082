#ifndef PADSIM_METRICS_RECORDS_IO_HPP
#define PADSIM_METRICS_RECORDS_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "padsim/metrics/csv.hpp"
#include "padsim/workload/workload.hpp"

namespace padsim {

inline const std::vector<std::string> kDownloadsHeader{"download_id", "client",    "size_bytes",    "start_us",
                                                       "end_us",      "status",    "content_bytes", "padding_rx",
                                                       "padding_tx"};
inline const std::vector<std::string> kProgressHeader{"download_id", "time_us", "bytes", "padding_rx"};

/// Writes downloads.csv and progress.csv for the given records.
inline void write_records(const std::vector<const DownloadRecord*>& records, const std::string& dir) {
  csv::Writer d(dir + "/downloads.csv");
  csv::Writer p(dir + "/progress.csv");
  d.row(kDownloadsHeader);
  p.row(kProgressHeader);
  for (const auto* r : records) {
    d.row({std::to_string(r->id), r->client, std::to_string(r->size), std::to_string(r->start.count()),
           r->end ? std::to_string(r->end->count()) : "", to_string(r->status), std::to_string(r->content_bytes()),
           std::to_string(r->padding_rx), std::to_string(r->padding_tx)});
    for (const auto& e : r->progress) {
      p.row({std::to_string(r->id), std::to_string(e.at.count()), std::to_string(e.bytes),
             std::to_string(e.padding_rx)});
    }
  }
  d.close();
  p.close();
}

/// Reads a run directory back into records (progress attached, ids kept).
inline std::vector<DownloadRecord> read_records(const std::string& dir) {
  const auto d = csv::read(dir + "/downloads.csv");
  if (d.header != kDownloadsHeader) throw ConfigError(dir + "/downloads.csv: unexpected header");
  const auto p = csv::read(dir + "/progress.csv");
  if (p.header != kProgressHeader) throw ConfigError(dir + "/progress.csv: unexpected header");
  std::vector<DownloadRecord> out;
  std::map<std::uint64_t, std::size_t> index;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto& row = d.rows[i];
    const auto where = dir + "/downloads.csv:" + std::to_string(i + 2);
    DownloadRecord r;
    r.id = static_cast<std::uint64_t>(csv::to_int(row[0], where));
    r.client = row[1];
    r.size = static_cast<std::uint64_t>(csv::to_int(row[2], where));
    r.start = SimTime::us(csv::to_int(row[3], where));
    if (!row[4].empty()) r.end = SimTime::us(csv::to_int(row[4], where));
    const auto st = parse_status(row[5]);
    if (!st) throw ConfigError(where + ": unknown status '" + row[5] + "'");
    r.status = *st;
    r.padding_rx = static_cast<std::uint64_t>(csv::to_int(row[7], where));
    r.padding_tx = static_cast<std::uint64_t>(csv::to_int(row[8], where));
    index[r.id] = out.size();
    out.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto& row = p.rows[i];
    const auto where = dir + "/progress.csv:" + std::to_string(i + 2);
    const auto id = static_cast<std::uint64_t>(csv::to_int(row[0], where));
    auto it = index.find(id);
    if (it == index.end()) throw ConfigError(where + ": unknown download " + row[0]);
    out[it->second].progress.push_back({SimTime::us(csv::to_int(row[1], where)),
                                        static_cast<std::uint64_t>(csv::to_int(row[2], where)),
                                        static_cast<std::uint64_t>(csv::to_int(row[3], where))});
  }
  return out;
}

} // namespace padsim

#endif // PADSIM_METRICS_RECORDS_IO_HPP
