#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "taibai/neuron_core.hpp"
#include "taibai/packet.hpp"

// Two-level fan-in / fan-out topology tables: a Directory Table (DT) of
// Directory Entries indexing slices of an Information Table (IT) of
// Information Entries.
//
// Fan-in IE types:
//   Type 0  one destination neuron id per IE; the NC resolves the weight
//           slot from the packet's global axon id (bitmap / dense lookup).
//   Type 1  (neuron id, local axon id) pairs; the local axon id is the
//           weight slot, no decode needed.
//   Type 2  full connection: {mask, margin, count, start}; every NC selected
//           by the mask receives events for local ids start + i*margin,
//           i in [0, count) — four scalar fields regardless of layer width.
//   Type 3  convolution: {mask, count, neuron, local_axon}; every selected
//           NC receives events for local ids neuron + i (the channel
//           replicas of one spatial position); the weight address is
//           global_axon * k^2 + local_axon, resolved in the NC.
//
// Value-carrying directory entries deliver the packet payload as an FP16
// current instead of a weighted spike; their events carry the reserved
// global axon id 0xFFFF.

namespace taibai {

// Weight address of a shared convolution filter:
// addr = global_axon * k^2 + local_axon.
inline uint32_t conv_weight_addr(uint32_t global_axon, uint32_t local_axon,
                                 uint32_t k) {
  if (local_axon >= k * k)
    throw SimError("conv_weight_addr: local axon id >= k^2");
  return global_axon * k * k + local_axon;
}

struct FanInDE {
  bool occupied = false;
  uint8_t tag = 0;
  uint8_t ie_type = 0;
  bool value_carrying = false;
  uint16_t it_offset = 0;
  uint16_t it_count = 0;
};

// One fan-in information entry, four 16-bit storage words; the owning DE's
// type decides which fields matter:
//   type 0: nc, neuron
//   type 1: nc, neuron, aux = local axon id (the weight slot)
//   type 2: mask, neuron = starting id, aux = margin, count (ids per NC)
//   type 3: mask, neuron = first replica id, aux = filter offset, count
struct FanInIE {
  uint8_t nc = 0;
  uint8_t mask = 0;
  uint16_t neuron = 0;
  uint16_t aux = 0;
  uint16_t count = 0;
};

struct FanInTable {
  std::vector<FanInDE> dt;
  std::vector<FanInIE> it;
};

struct FanOutDE {
  uint16_t global_axon = 0;
  uint16_t fwd_offset = 0;
  uint16_t fwd_count = 0;
  uint16_t dly_offset = 0;
  uint16_t dly_count = 0;
  uint16_t delay = 0;  // timesteps before the delayed range emits
};

inline constexpr uint8_t kRouteUnicast = 0;
inline constexpr uint8_t kRouteMulticast = 1;
inline constexpr uint8_t kRouteBroadcast = 2;

struct FanOutIE {
  uint8_t mode = kRouteUnicast;
  Coord d0, d1;        // destination rectangle (host sentinel allowed)
  uint8_t tag = 0;
  uint16_t index = 0;  // fan-in DT index at the destination CCs
  uint16_t axon = 0;   // packet payload for weighted spikes
};

struct FanOutTable {
  std::vector<FanOutDE> dt;  // indexed by CC-local fired id (nc*256 + local)
  std::vector<FanOutIE> it;
};

// Expands one matched fan-in DE into input events, called once per selected
// NC per event. `payload` is the packet payload (global axon id, or the
// FP16 value for value-carrying entries).
void decode_fanin(const FanInDE& de, const std::vector<FanInIE>& it,
                  uint16_t payload,
                  const std::function<void(int nc, const InputEvent&)>& emit);

// Convenience form for tests: batches grouped by NC.
std::vector<std::vector<InputEvent>> decode_fanin_batches(
    const FanInDE& de, const std::vector<FanInIE>& it, uint16_t payload,
    int num_ncs = 8);

}  // namespace taibai
