#pragma once

#include <cstdint>

#include "taibai/isa.hpp"

namespace taibai {

// Grid coordinate: row 0..H-1 (top to bottom), col 0..W-1 (left to right).
struct Coord {
  uint8_t row = 0;
  uint8_t col = 0;
  bool operator==(const Coord&) const = default;
  auto operator<=>(const Coord&) const = default;
};

// The host attaches at router (0,0); packets addressed to the sentinel
// coordinate (15,15) route there and leave the mesh toward the host.
inline constexpr Coord kHostCoord{15, 15};

enum class PacketType : uint8_t {
  SpikeUnicast = 0,
  SpikeMulticast = 1,
  SpikeBroadcast = 2,
  MemWrite = 3,
  MemReadReq = 4,
  MemReadResp = 5,
  Sync = 6,
};

// Multicast/broadcast work stage carried in the phase field.
inline constexpr uint8_t kPhaseApproach = 0;
inline constexpr uint8_t kPhaseColumn = 1;
inline constexpr uint8_t kPhaseRow = 2;

// The 64-bit NoC packet. Serialized layout (little-endian uint64):
//
//   [2:0]   type        [4:3]   phase      [12:5] tag    [24:13] index
//   [28:25] x0 (col0)   [32:29] y0 (row0)
//   [36:33] x1 (col1)   [40:37] y1 (row1)
//   [56:41] payload     [63:57] reserved (zero)
//
// Spike packets: tag/index address the fan-in directory table at the
// destination CC; payload carries the upstream global axon id (or an FP16
// value for value-carrying deliveries). Memory-access packets: tag||index
// form a 20-bit config-space address and payload carries the data word.
struct Packet {
  PacketType type = PacketType::SpikeUnicast;
  uint8_t phase = kPhaseApproach;
  uint8_t tag = 0;
  uint16_t index = 0;  // 12 bits
  Coord dest0;         // (y0, x0)
  Coord dest1;         // (y1, x1)
  uint16_t payload = 0;
  // Simulator-side source stamp for traffic profiling; not serialized.
  Coord sim_src = kHostCoord;

  bool operator==(const Packet&) const = default;

  bool is_spike() const {
    return type == PacketType::SpikeUnicast ||
           type == PacketType::SpikeMulticast ||
           type == PacketType::SpikeBroadcast;
  }
  bool unicast_shape() const { return dest0 == dest1; }
  uint32_t mem_addr() const {
    return (static_cast<uint32_t>(tag) << 12) | index;
  }

  uint64_t encode() const;
  static Packet decode(uint64_t word);

  static Packet mem_write(Coord dst, uint32_t addr, uint16_t value);
  static Packet mem_read_req(Coord dst, uint32_t addr);
};

}  // namespace taibai
