#include "taibai/packet.hpp"

namespace taibai {

uint64_t Packet::encode() const {
  uint64_t w = 0;
  w |= static_cast<uint64_t>(type) & 0x7u;
  w |= (static_cast<uint64_t>(phase) & 0x3u) << 3;
  w |= static_cast<uint64_t>(tag) << 5;
  w |= (static_cast<uint64_t>(index) & 0xFFFu) << 13;
  w |= (static_cast<uint64_t>(dest0.col) & 0xFu) << 25;
  w |= (static_cast<uint64_t>(dest0.row) & 0xFu) << 29;
  w |= (static_cast<uint64_t>(dest1.col) & 0xFu) << 33;
  w |= (static_cast<uint64_t>(dest1.row) & 0xFu) << 37;
  w |= static_cast<uint64_t>(payload) << 41;
  return w;
}

Packet Packet::decode(uint64_t w) {
  Packet p;
  const uint8_t t = w & 0x7u;
  if (t > static_cast<uint8_t>(PacketType::Sync))
    throw SimError("bad packet type field");
  p.type = static_cast<PacketType>(t);
  p.phase = (w >> 3) & 0x3u;
  p.tag = static_cast<uint8_t>((w >> 5) & 0xFFu);
  p.index = static_cast<uint16_t>((w >> 13) & 0xFFFu);
  p.dest0.col = (w >> 25) & 0xFu;
  p.dest0.row = (w >> 29) & 0xFu;
  p.dest1.col = (w >> 33) & 0xFu;
  p.dest1.row = (w >> 37) & 0xFu;
  p.payload = static_cast<uint16_t>((w >> 41) & 0xFFFFu);
  return p;
}

Packet Packet::mem_write(Coord dst, uint32_t addr, uint16_t value) {
  Packet p;
  p.type = PacketType::MemWrite;
  p.tag = static_cast<uint8_t>((addr >> 12) & 0xFFu);
  p.index = static_cast<uint16_t>(addr & 0xFFFu);
  p.dest0 = p.dest1 = dst;
  p.payload = value;
  return p;
}

Packet Packet::mem_read_req(Coord dst, uint32_t addr) {
  Packet p;
  p.type = PacketType::MemReadReq;
  p.tag = static_cast<uint8_t>((addr >> 12) & 0xFFu);
  p.index = static_cast<uint16_t>(addr & 0xFFFu);
  p.dest0 = p.dest1 = dst;
  return p;
}

}  // namespace taibai
