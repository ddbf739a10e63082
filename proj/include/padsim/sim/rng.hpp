#ifndef PADSIM_SIM_RNG_HPP
#define PADSIM_SIM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace padsim {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Named pseudo-random stream (xoshiro256**). The state is derived from
/// (seed, stream_id) only, so draws on one stream never perturb another.
class RngStream {
public:
  RngStream() : RngStream(0, "default") {}
  RngStream(std::uint64_t seed, std::string stream_id) : seed_(seed), id_(std::move(stream_id)) {
    std::uint64_t sm = seed_ ^ fnv1a64(id_);
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t seed() const { return seed_; }
  const std::string& stream_id() const { return id_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; safe to take the log of.
  double next_open_unit() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, span). span must be > 0.
  std::uint64_t next_below(std::uint64_t span) { return next_u64() % span; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_unit() < p;
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_;
  std::string id_;
  std::uint64_t s_[4];
};

} // namespace padsim

#endif // PADSIM_SIM_RNG_HPP
