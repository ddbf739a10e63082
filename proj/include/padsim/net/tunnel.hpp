#ifndef PADSIM_NET_TUNNEL_HPP
#define PADSIM_NET_TUNNEL_HPP

#include <cstdint>
#include <string_view>

#include "padsim/net/cell.hpp"

namespace padsim {

/// The two ends of the padded tunnel: client and middle relay.
enum class Endpoint : std::uint8_t { Client, Middle };

inline const char* to_string(Endpoint e) { return e == Endpoint::Client ? "client" : "middle"; }

/// Direction a machine at this endpoint injects padding in.
inline constexpr Direction padding_direction(Endpoint e) {
  return e == Endpoint::Client ? Direction::ServerBound : Direction::ClientBound;
}

enum class Trigger : std::uint8_t {
  NonPaddingSent,
  NonPaddingReceived,
  PaddingSent,
  PaddingReceived,
  LengthExceeded,
  InfinitySampled,
};

inline constexpr std::size_t kTriggerCount = 6;

inline const char* to_string(Trigger t) {
  switch (t) {
    case Trigger::NonPaddingSent: return "NonPaddingSent";
    case Trigger::NonPaddingReceived: return "NonPaddingReceived";
    case Trigger::PaddingSent: return "PaddingSent";
    case Trigger::PaddingReceived: return "PaddingReceived";
    case Trigger::LengthExceeded: return "LengthExceeded";
    case Trigger::InfinitySampled: return "InfinitySampled";
  }
  return "?";
}

inline bool parse_trigger(std::string_view s, Trigger& out) {
  for (std::uint8_t i = 0; i < kTriggerCount; ++i) {
    auto t = static_cast<Trigger>(i);
    if (s == to_string(t)) {
      out = t;
      return true;
    }
  }
  return false;
}

/// Cells leaving a tunnel endpoint toward the opposite endpoint. Used for the
/// constant-rate slot audit.
struct EgressRecord {
  SimTime at;
  CircuitId circuit;
  Endpoint endpoint;
  CellKind kind;
};

/// What a defense may do to the tunnel it is attached to. Implemented by the
/// network simulator and by the trace replayer.
class TunnelPort {
public:
  virtual ~TunnelPort() = default;
  virtual bool circuit_open(CircuitId c) const = 0;
  virtual void emit_padding(CircuitId c, Endpoint at) = 0;
  /// Sends a previously held non-padding cell.
  virtual void release(CircuitId c, Endpoint at, const Cell& cell) = 0;
};

/// Callbacks from the tunnel into the defense layer.
class DefenseHooks {
public:
  virtual ~DefenseHooks() = default;
  virtual void circuit_opened(CircuitId c, SimTime at) = 0;
  virtual void circuit_closed(CircuitId c) = 0;
  virtual void cell_event(CircuitId c, Endpoint at, Trigger t) = 0;
  /// Returns true if the defense took the non-padding cell and will release
  /// it itself.
  virtual bool hold(CircuitId c, Endpoint at, const Cell& cell) = 0;
  virtual void handle(const Event& ev) = 0;
};

} // namespace padsim

#endif // PADSIM_NET_TUNNEL_HPP
