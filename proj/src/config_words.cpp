#include "taibai/config_words.hpp"

namespace taibai::cfg {

void append_fanin_de(Words& w, uint32_t i, const FanInDE& de) {
  const uint32_t base = kFanInDtBase + i * 4;
  w.push_back({base + 0, static_cast<uint16_t>(
                             (de.tag << 8) | (de.ie_type << 2) |
                             (de.value_carrying ? 2 : 0) | (de.occupied ? 1 : 0))});
  w.push_back({base + 1, de.it_offset});
  w.push_back({base + 2, de.it_count});
}

void append_fanin_ie(Words& w, uint32_t i, const FanInIE& ie) {
  const uint32_t base = kFanInItBase + i * 4;
  w.push_back({base + 0, static_cast<uint16_t>((ie.mask << 8) | ie.nc)});
  w.push_back({base + 1, ie.neuron});
  w.push_back({base + 2, ie.aux});
  w.push_back({base + 3, ie.count});
}

void append_fanout_de(Words& w, uint32_t i, const FanOutDE& de) {
  const uint32_t base = kFanOutDtBase + i * 8;
  w.push_back({base + 0, de.global_axon});
  w.push_back({base + 1, de.fwd_offset});
  w.push_back({base + 2, de.fwd_count});
  w.push_back({base + 3, de.dly_offset});
  w.push_back({base + 4, de.dly_count});
  w.push_back({base + 5, de.delay});
}

void append_fanout_ie(Words& w, uint32_t i, const FanOutIE& ie) {
  const uint32_t base = kFanOutItBase + i * 4;
  w.push_back({base + 0,
               static_cast<uint16_t>(ie.d0.col | (ie.d0.row << 4) |
                                     (ie.d1.col << 8) | (ie.d1.row << 12))});
  w.push_back({base + 1, static_cast<uint16_t>((ie.tag << 8) | ie.mode)});
  w.push_back({base + 2, ie.index});
  w.push_back({base + 3, ie.axon});
}

void append_program(Words& w, int nc, const Program& p) {
  const uint32_t base = kNcProgBase + nc * kNcProgStride;
  const auto words = p.encode();
  if (words.size() * 2 > kNcProgStride)
    throw SimError("program image exceeds its config region");
  for (size_t i = 0; i < words.size(); i++) {
    w.push_back({base + 2 * i, static_cast<uint16_t>(words[i] & 0xFFFF)});
    w.push_back({base + 2 * i + 1, static_cast<uint16_t>(words[i] >> 16)});
  }
}

void append_nc_data(Words& w, int nc, uint32_t offset,
                    const std::vector<uint16_t>& data) {
  const uint32_t base = kNcDataBase + nc * kNcDataStride + offset;
  if (offset + data.size() > kNcDataStride)
    throw SimError("NC data image exceeds the data region");
  for (size_t i = 0; i < data.size(); i++)
    w.push_back({base + i, data[i]});
}

void append_block_base(Words& w, int nc, uint16_t neuron, uint16_t base) {
  w.push_back({kNcRegBase + nc * kNcRegStride + neuron, base});
}

void append_neurons_hosted(Words& w, int nc, uint16_t n) {
  w.push_back({kNcRegBase + nc * kNcRegStride + kNcRegHosted, n});
}

}  // namespace taibai::cfg
