#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "taibai/cortical_column.hpp"

// Generators for the (address, value) word sequences that configure a CC.
// The same words serve the direct INIT path, the packet-replay path, and
// the artifact's config-packet stream.

namespace taibai::cfg {

using Words = std::vector<std::pair<uint32_t, uint16_t>>;

void append_fanin_de(Words& w, uint32_t i, const FanInDE& de);
void append_fanin_ie(Words& w, uint32_t i, const FanInIE& ie);
void append_fanout_de(Words& w, uint32_t i, const FanOutDE& de);
void append_fanout_ie(Words& w, uint32_t i, const FanOutIE& ie);
void append_program(Words& w, int nc, const Program& p);
void append_nc_data(Words& w, int nc, uint32_t offset,
                    const std::vector<uint16_t>& data);
void append_block_base(Words& w, int nc, uint16_t neuron, uint16_t base);
void append_neurons_hosted(Words& w, int nc, uint16_t n);

}  // namespace taibai::cfg
