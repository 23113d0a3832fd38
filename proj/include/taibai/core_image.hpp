#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "taibai/presets.hpp"

namespace taibai {

// Build-time description of one neuron's data block. Laid out as
// [vars | header | bitmap? | weights? | extra?]; weights may instead point
// into a shared bank (convolution filter reuse).
struct NeuronBlock {
  std::array<uint16_t, kVarWords> vars{};
  std::vector<uint16_t> weights;       // compressed, slot order
  std::vector<uint16_t> bitmap_words;  // empty means dense
  uint16_t axbits = 0;                 // axon space; = weights.size() if dense
  bool shared_wbase = false;
  uint16_t wbase = 0;                  // used when shared_wbase
  std::vector<uint16_t> extra;         // parallel arrays (pre times, counts)

  uint32_t words() const {
    return kBlockFixed + static_cast<uint32_t>(bitmap_words.size()) +
           (shared_wbase ? 0 : static_cast<uint32_t>(weights.size())) +
           static_cast<uint32_t>(extra.size());
  }
};

// Writes `blocks` into `data` starting at `cursor`, recording each block's
// base address. Returns the next free word.
uint32_t place_blocks(std::vector<uint16_t>& data,
                      std::vector<uint16_t>& block_bases,
                      const std::vector<NeuronBlock>& blocks, uint32_t cursor);

inline std::array<uint16_t, kVarWords> lif_vars(uint16_t v, uint16_t tau,
                                                uint16_t i, uint16_t vth) {
  std::array<uint16_t, kVarWords> vars{};
  vars[kVarV] = v;
  vars[kVarTau] = tau;
  vars[kVarI] = i;
  vars[kVarVth] = vth;
  return vars;
}

}  // namespace taibai
