#ifndef PADSIM_METRICS_CSV_HPP
#define PADSIM_METRICS_CSV_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "padsim/sim/errors.hpp"

namespace padsim::csv {

/// Minimal comma-separated writer: header row, LF line endings, no quoting
/// (no field ever contains a comma).
class Writer {
public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw ConfigError("cannot write " + path);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw ConfigError("error writing " + path_);
  }

private:
  std::ofstream out_;
  std::string path_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ConfigError("csv: missing column '" + name + "'");
  }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline Table read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != t.header.size()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(f.size()));
    }
    t.rows.push_back(std::move(f));
  }
  return t;
}

inline std::int64_t to_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an integer, got '" + s + "'");
  }
}

/// Half-up rounding to `decimals` places, printed without exponent.
inline std::string fixed(double x, int decimals) {
  double scale = 1.0;
  for (int i = 0; i < decimals; ++i) scale *= 10.0;
  const auto t = static_cast<std::int64_t>(std::floor(x * scale + 0.5));
  const auto mag = t < 0 ? -t : t;
  const auto whole = mag / static_cast<std::int64_t>(scale);
  auto frac = std::to_string(mag % static_cast<std::int64_t>(scale));
  std::string s = (t < 0 ? "-" : "") + std::to_string(whole);
  if (decimals > 0) s += "." + std::string(static_cast<std::size_t>(decimals) - frac.size(), '0') + frac;
  return s;
}

inline std::string fixed(const std::optional<double>& x, int decimals) { return x ? fixed(*x, decimals) : ""; }

/// Exact microseconds-to-milliseconds rendering (three decimals).
inline std::string us_as_ms(std::int64_t us) {
  const auto mag = us < 0 ? -us : us;
  auto frac = std::to_string(mag % 1000);
  return (us < 0 ? "-" : "") + std::to_string(mag / 1000) + "." + std::string(3 - frac.size(), '0') + frac;
}

} // namespace padsim::csv

#endif // PADSIM_METRICS_CSV_HPP
