#ifndef PADSIM_NET_CELL_HPP
#define PADSIM_NET_CELL_HPP

#include <cstdint>

#include "padsim/sim/engine.hpp"
#include "padsim/sim/time.hpp"

namespace padsim {

using HostId = std::uint32_t;
using CircuitId = std::uint32_t;

/// Every cell occupies exactly this many bytes on the wire, whatever its kind.
inline constexpr std::uint32_t kCellSize = 512;

enum class CellKind : std::uint8_t { Content, Padding, Control };
enum class Direction : std::uint8_t { ClientBound, ServerBound };

inline const char* to_string(CellKind k) {
  switch (k) {
    case CellKind::Content: return "content";
    case CellKind::Padding: return "padding";
    case CellKind::Control: return "control";
  }
  return "?";
}

inline const char* to_string(Direction d) {
  return d == Direction::ClientBound ? "client_bound" : "server_bound";
}

class Cell {
public:
  Cell() = default;
  Cell(CellKind kind, Direction dir, CircuitId circuit, SimTime created_at, std::uint16_t payload = 0)
      : kind_(kind), dir_(dir), payload_(payload), circuit_(circuit), created_at_(created_at) {}

  static constexpr std::uint32_t size() { return kCellSize; }
  CellKind kind() const { return kind_; }
  Direction direction() const { return dir_; }
  CircuitId circuit() const { return circuit_; }
  SimTime created_at() const { return created_at_; }
  /// Application bytes carried (content cells only).
  std::uint16_t payload() const { return payload_; }
  bool is_padding() const { return kind_ == CellKind::Padding; }

private:
  CellKind kind_ = CellKind::Control;
  Direction dir_ = Direction::ServerBound;
  std::uint16_t payload_ = 0;
  CircuitId circuit_ = 0;
  SimTime created_at_{0};
};

/// Event payload shared by every module driven from one engine.
struct EventPayload {
  Cell cell;
  std::uint8_t pos = 0;  // position along the circuit path
  std::uint64_t aux = 0;
};

using Engine = BasicEngine<EventPayload>;
using Event = Engine::Event;

} // namespace padsim

#endif // PADSIM_NET_CELL_HPP
