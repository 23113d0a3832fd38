#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "taibai/tables.hpp"

namespace taibai {

// 20-bit per-CC configuration address space, word-granular. Every table and
// memory of the column is reachable through memory-access packets; writes
// during INIT configure the model, reads return the live state.
namespace cfg {
inline constexpr uint32_t kNcDataBase = 0x00000;   // 8 x 0x8000 words
inline constexpr uint32_t kNcDataStride = 0x8000;
inline constexpr uint32_t kNcProgBase = 0x40000;   // 8 x 0x1000 words
inline constexpr uint32_t kNcProgStride = 0x1000;  // [n_integ, n_fire, 2w/insn]
inline constexpr uint32_t kNcRegBase = 0x48000;    // 8 x 0x200 words
inline constexpr uint32_t kNcRegStride = 0x200;    // [0..255]=block base,
inline constexpr uint32_t kNcRegHosted = 0x100;    // [0x100]=neurons hosted
inline constexpr uint32_t kFanInDtBase = 0x49000;  // 4 words per DE, 4096 DEs
inline constexpr uint32_t kFanInItBase = 0x4D000;  // 4 words per IE, 16384
inline constexpr uint32_t kFanOutDtBase = 0x5D000; // 8 words per DE, 2048
inline constexpr uint32_t kFanOutItBase = 0x61000; // 4 words per IE, 16384
inline constexpr uint32_t kEnd = 0x71000;
inline constexpr uint32_t kMaxFanInDes = 4096;
inline constexpr uint32_t kMaxFanInIes = 16384;
inline constexpr uint32_t kMaxFanOutDes = 2048;
inline constexpr uint32_t kMaxFanOutIes = 16384;
}  // namespace cfg

inline constexpr int kNcsPerCc = 8;

// The scheduler and state of one cortical column: 8 neuron cores, the
// fan-in/fan-out tables, packet queues, and the delayed-spike buffer for
// skip connections.
class CorticalColumn {
 public:
  CorticalColumn();

  Coord coord;
  std::array<NeuronCore, kNcsPerCc> nc;
  FanInTable fan_in;
  FanOutTable fan_out;

  std::deque<Packet> inbox;    // delivered by the NoC, pending decode
  std::deque<Packet> outbox;   // produced, pending injection

  // Counters.
  uint64_t drops = 0;           // tag-mismatched deliveries
  uint64_t dispatch_cycles = 0; // scheduler work, one per dispatched event
  uint64_t spikes_fired = 0;

  // Decodes and dispatches pending inbox packets (all-or-nothing per packet
  // against the NC buffers), then lets every core integrate. Returns true
  // if any work was done.
  bool pump(uint64_t now);

  // Fire stage at timestep `now`: emits delayed spikes that are due, runs
  // every core's fire segment, and fans out fresh spikes (delayed-type
  // spikes are additionally buffered for re-emission).
  void run_fire(uint64_t now);

  bool quiescent() const;

  void config_write(uint32_t addr, uint16_t value);
  uint16_t config_read(uint32_t addr) const;
  // Decodes the staged program images into the cores (INIT completion).
  void finalize_programs();

  // Simulator-side stats metadata: CC-local fired id -> model layer.
  std::vector<int32_t> layer_of;
  std::vector<uint64_t> layer_spikes;

 private:
  void fanout_event(const OutputEvent& ev, uint16_t cc_local_id, uint64_t now);
  void emit_ie_packet(const FanOutIE& ie, uint16_t payload, bool value);
  std::map<uint64_t, std::vector<uint16_t>> delayed_;  // due time -> fired ids
  std::array<std::vector<uint16_t>, kNcsPerCc> prog_img_;
};

}  // namespace taibai
