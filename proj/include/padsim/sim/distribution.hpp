#ifndef PADSIM_SIM_DISTRIBUTION_HPP
#define PADSIM_SIM_DISTRIBUTION_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "padsim/sim/errors.hpp"
#include "padsim/sim/rng.hpp"

namespace padsim {

/// Integer-valued distributions. Samples are microseconds for timer delays and
/// plain counts for padding lengths. A draw of std::nullopt is "infinite".

struct Uniform {
  std::int64_t low = 0;
  std::int64_t high = 0;  // inclusive
};

struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Failures before the first success: support {0, 1, 2, ...}, optionally capped.
struct Geometric {
  double p = 0.5;
  std::optional<std::int64_t> max;
};

struct Exponential {
  double mean = 1.0;
};

/// Token histogram with an infinity bin. Bin i covers [edges[i], edges[i+1]).
struct Histogram {
  std::vector<std::int64_t> edges;
  std::vector<std::uint32_t> tokens;
  std::uint32_t infinity_tokens = 0;
  bool token_removal = true;
};

using Distribution = std::variant<Uniform, LogNormal, Geometric, Exponential, Histogram>;

inline void validate(const Distribution& d, const std::string& field) {
  auto fail = [&](const std::string& why) { throw ConfigError(field + ": " + why); };
  if (auto* u = std::get_if<Uniform>(&d)) {
    if (u->low > u->high) fail("uniform low > high");
    if (u->low < 0) fail("uniform low must be >= 0");
  } else if (auto* l = std::get_if<LogNormal>(&d)) {
    if (!(l->sigma >= 0.0) || !std::isfinite(l->mu)) fail("invalid log-normal parameters");
  } else if (auto* g = std::get_if<Geometric>(&d)) {
    if (!(g->p > 0.0 && g->p <= 1.0)) fail("geometric p must be in (0, 1]");
    if (g->max && *g->max < 0) fail("geometric max must be >= 0");
  } else if (auto* e = std::get_if<Exponential>(&d)) {
    if (!(e->mean > 0.0)) fail("exponential mean must be > 0");
  } else if (auto* h = std::get_if<Histogram>(&d)) {
    if (h->edges.size() != h->tokens.size() + 1 && !(h->edges.empty() && h->tokens.empty())) {
      fail("histogram needs exactly one more edge than bins");
    }
    for (std::size_t i = 1; i < h->edges.size(); ++i) {
      if (h->edges[i] <= h->edges[i - 1]) fail("histogram edges must be strictly increasing");
    }
    if (!h->edges.empty() && h->edges.front() < 0) fail("histogram edges must be >= 0");
    std::uint64_t total = h->infinity_tokens;
    for (auto t : h->tokens) total += t;
    if (total == 0) fail("histogram has no tokens");
  }
}

/// A distribution plus the mutable token state a histogram needs. Machines
/// hold one per state and refill it on every state entry.
class Sampler {
public:
  Sampler() = default;
  explicit Sampler(Distribution d) : spec_(std::move(d)) { refill(); }

  const Distribution& spec() const { return spec_; }

  void refill() {
    if (auto* h = std::get_if<Histogram>(&spec_)) {
      tokens_ = h->tokens;
      infinity_ = h->infinity_tokens;
    }
  }

  std::optional<std::int64_t> draw(RngStream& rng) {
    return std::visit([&](const auto& d) { return sample(d, rng); }, spec_);
  }

  /// Tokens currently left in a histogram (finite bins then infinity bin).
  std::vector<std::uint32_t> remaining_tokens() const {
    auto v = tokens_;
    v.push_back(infinity_);
    return v;
  }

private:
  static std::optional<std::int64_t> sample(const Uniform& u, RngStream& rng) {
    const auto span = static_cast<std::uint64_t>(u.high - u.low) + 1;
    if (span == 0) return u.low + static_cast<std::int64_t>(rng.next_u64() >> 1);
    return u.low + static_cast<std::int64_t>(rng.next_below(span));
  }

  static std::optional<std::int64_t> sample(const LogNormal& l, RngStream& rng) {
    const double u1 = rng.next_open_unit();
    const double u2 = rng.next_unit();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return clamp_round(std::exp(l.mu + l.sigma * z));
  }

  static std::optional<std::int64_t> sample(const Geometric& g, RngStream& rng) {
    std::int64_t k = 0;
    if (g.p < 1.0) {
      const double u = rng.next_open_unit();
      const double v = std::floor(std::log(u) / std::log(1.0 - g.p));
      k = v >= 9.0e18 ? std::numeric_limits<std::int64_t>::max() : static_cast<std::int64_t>(v);
    }
    if (g.max && k > *g.max) k = *g.max;
    return k;
  }

  static std::optional<std::int64_t> sample(const Exponential& e, RngStream& rng) {
    return clamp_round(-e.mean * std::log(rng.next_open_unit()));
  }

  std::optional<std::int64_t> sample(const Histogram& h, RngStream& rng) {
    std::uint64_t total = infinity_;
    for (auto t : tokens_) total += t;
    if (total == 0) return std::nullopt;  // bins exhausted for this visit
    std::uint64_t r = rng.next_below(total);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (r < tokens_[i]) {
        if (h.token_removal) --tokens_[i];
        const auto lo = h.edges[i];
        const auto width = static_cast<std::uint64_t>(h.edges[i + 1] - lo);
        return lo + static_cast<std::int64_t>(rng.next_below(width));
      }
      r -= tokens_[i];
    }
    if (h.token_removal) --infinity_;
    return std::nullopt;
  }

  static std::optional<std::int64_t> clamp_round(double v) {
    if (!(v < 9.0e18)) return std::numeric_limits<std::int64_t>::max();
    return static_cast<std::int64_t>(std::llround(v));
  }

  Distribution spec_ = Uniform{};
  std::vector<std::uint32_t> tokens_;
  std::uint32_t infinity_ = 0;
};

/// Draws from a distribution without persistent token state.
inline std::optional<std::int64_t> draw(RngStream& rng, const Distribution& d) {
  Sampler s(d);
  return s.draw(rng);
}

} // namespace padsim

#endif // PADSIM_SIM_DISTRIBUTION_HPP
