#include "taibai/tables.hpp"

namespace taibai {

void decode_fanin(const FanInDE& de, const std::vector<FanInIE>& it,
                  uint16_t payload,
                  const std::function<void(int nc, const InputEvent&)>& emit) {
  if (static_cast<size_t>(de.it_offset) + de.it_count > it.size())
    throw SimError("fan-in DE information range outside the IT");
  for (uint32_t i = de.it_offset; i < de.it_offset + de.it_count; i++) {
    const FanInIE& ie = it[i];
    InputEvent ev;
    if (de.value_carrying) {
      ev.axon_global = kAxonValue;
      ev.payload = payload;
      ev.value_carrying = true;
    } else {
      ev.axon_global = payload;
    }
    switch (de.ie_type) {
      case 0: {
        ev.target = ie.neuron;
        emit(ie.nc, ev);
        break;
      }
      case 1: {
        ev.target = ie.neuron;
        if (!de.value_carrying) {
          ev.axon_global = ie.aux;  // direct weight slot
          ev.axon_local = ie.aux;
        }
        emit(ie.nc, ev);
        break;
      }
      case 2: {
        if (ie.aux == 0)
          throw SimError("type-2 IE margin must be positive");
        for (int nc = 0; nc < 8; nc++) {
          if (!((ie.mask >> nc) & 1)) continue;
          for (uint32_t j = 0; j < ie.count; j++) {
            ev.target = static_cast<uint16_t>(ie.neuron + j * ie.aux);
            emit(nc, ev);
          }
        }
        break;
      }
      case 3: {
        if (!de.value_carrying) ev.axon_local = ie.aux;
        for (int nc = 0; nc < 8; nc++) {
          if (!((ie.mask >> nc) & 1)) continue;
          for (uint32_t j = 0; j < ie.count; j++) {
            ev.target = static_cast<uint16_t>(ie.neuron + j);
            emit(nc, ev);
          }
        }
        break;
      }
      default:
        throw SimError("bad fan-in IE type");
    }
  }
}

std::vector<std::vector<InputEvent>> decode_fanin_batches(
    const FanInDE& de, const std::vector<FanInIE>& it, uint16_t payload,
    int num_ncs) {
  std::vector<std::vector<InputEvent>> batches(num_ncs);
  decode_fanin(de, it, payload, [&](int nc, const InputEvent& ev) {
    if (nc < 0 || nc >= num_ncs) throw SimError("IE selects a bad NC");
    batches[nc].push_back(ev);
  });
  return batches;
}

}  // namespace taibai
