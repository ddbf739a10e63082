#ifndef PADSIM_SIM_TIME_HPP
#define PADSIM_SIM_TIME_HPP

#include <compare>
#include <cstdint>
#include <limits>

namespace padsim {

/// Simulated time in integer microseconds. Used both for instants (since
/// simulation start) and for deltas.
class SimTime {
public:
  constexpr SimTime() = default;
  constexpr explicit SimTime(std::int64_t us) : us_(us) {}

  static constexpr SimTime us(std::int64_t v) { return SimTime{v}; }
  static constexpr SimTime ms(std::int64_t v) { return SimTime{v * 1000}; }
  static constexpr SimTime sec(std::int64_t v) { return SimTime{v * 1000000}; }
  static constexpr SimTime from_seconds(double s) {
    return SimTime{static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))};
  }
  static constexpr SimTime infinite() {
    return SimTime{std::numeric_limits<std::int64_t>::max()};
  }

  constexpr std::int64_t count() const { return us_; }
  constexpr bool is_infinite() const { return us_ == infinite().us_; }
  constexpr double millis() const { return static_cast<double>(us_) / 1000.0; }

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime operator+(SimTime o) const {
    if (is_infinite() || o.is_infinite()) return infinite();
    return SimTime{us_ + o.us_};
  }
  constexpr SimTime operator-(SimTime o) const { return SimTime{us_ - o.us_}; }
  constexpr SimTime& operator+=(SimTime o) { return *this = *this + o; }
  constexpr SimTime operator*(std::int64_t k) const { return SimTime{us_ * k}; }

private:
  std::int64_t us_ = 0;
};

} // namespace padsim

#endif // PADSIM_SIM_TIME_HPP
