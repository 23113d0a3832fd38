#include "taibai/core_image.hpp"

namespace taibai {

uint32_t place_blocks(std::vector<uint16_t>& data,
                      std::vector<uint16_t>& block_bases,
                      const std::vector<NeuronBlock>& blocks,
                      uint32_t cursor) {
  for (const auto& b : blocks) {
    const uint32_t base = cursor;
    if (base + b.words() > data.size())
      throw SimError("neuron blocks exceed core data memory");
    if (base > 0xFFFF) throw SimError("block base beyond 16-bit address space");
    block_bases.push_back(static_cast<uint16_t>(base));
    for (int i = 0; i < kVarWords; i++) data[base + i] = b.vars[i];
    uint32_t at = base + kBlockFixed;
    const uint32_t bitmap_at = at;
    at += static_cast<uint32_t>(b.bitmap_words.size());
    uint16_t wbase;
    if (b.shared_wbase) {
      wbase = b.wbase;
    } else {
      wbase = static_cast<uint16_t>(at);
      at += static_cast<uint32_t>(b.weights.size());
    }
    data[base + kHdrOff + kHdrWcount] =
        static_cast<uint16_t>(b.weights.size());
    data[base + kHdrOff + kHdrAxbits] =
        b.bitmap_words.empty() ? static_cast<uint16_t>(b.axbits ? b.axbits
                                                                : b.weights.size())
                               : b.axbits;
    data[base + kHdrOff + kHdrFlags] =
        b.bitmap_words.empty() ? kHdrFlagDense : 0;
    data[base + kHdrOff + kHdrWbase] = wbase;
    for (size_t i = 0; i < b.bitmap_words.size(); i++)
      data[bitmap_at + i] = b.bitmap_words[i];
    if (!b.shared_wbase)
      for (size_t i = 0; i < b.weights.size(); i++)
        data[wbase + i] = b.weights[i];
    for (size_t i = 0; i < b.extra.size(); i++) data[at + i] = b.extra[i];
    at += static_cast<uint32_t>(b.extra.size());
    cursor = at;
  }
  return cursor;
}

}  // namespace taibai
