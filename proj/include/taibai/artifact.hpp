#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taibai/chip.hpp"
#include "taibai/ir.hpp"

namespace taibai {

// Location of one logical neuron's soma (or plain) unit.
struct SomaLoc {
  Coord coord;
  uint8_t nc = 0;
  uint16_t local = 0;
  uint16_t block_base = 0;  // data-memory address of its variable block
};

struct PopTable {
  Shape shape;
  uint8_t model = 0;
  uint8_t learning = 0;
  std::vector<SomaLoc> somas;
};

// The compiled binary: header, placement, the chip-configuring packet
// stream, the host input map, the population table (for run-time variable
// access and statistics), and the estimated INTEG cycle budget.
struct Artifact {
  static constexpr char kMagic[5] = "TBAI";
  uint32_t version = 1;
  uint16_t rows = 11, cols = 12;
  uint16_t num_ccs = 0;
  uint32_t timesteps = 32;
  uint64_t cycle_budget = 0;
  std::vector<Coord> placement;  // logical cc -> coordinate
  std::vector<Packet> config_stream;
  std::vector<HostFanout> host_inputs;
  std::vector<PopTable> pops;

  std::vector<uint8_t> to_bytes() const;
  static Artifact from_bytes(const std::vector<uint8_t>& bytes);
  void save(const std::string& path) const;
  static Artifact load(const std::string& path);

  // Config-space address of a soma variable (see presets.hpp offsets).
  uint32_t var_addr(int pop, uint32_t neuron, uint16_t var) const;
};

// Replays the artifact into a chip: config stream (direct application by
// default; via_packets exercises the memory-access packet path), program
// finalization, host input map and the stats layer table.
void load_artifact(Chip& chip, const Artifact& art, bool via_packets = false);

}  // namespace taibai
