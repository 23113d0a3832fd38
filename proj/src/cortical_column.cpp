#include "taibai/cortical_column.hpp"

#include <string>

namespace taibai {

CorticalColumn::CorticalColumn() = default;

bool CorticalColumn::pump(uint64_t now) {
  bool progress = false;
  // Decode inbox packets. A packet is dispatched all-or-nothing: if any
  // selected NC buffer lacks room the packet waits (backpressure) while the
  // cores drain.
  while (!inbox.empty()) {
    const Packet p = inbox.front();
    if (p.type == PacketType::MemWrite) {
      config_write(p.mem_addr(), p.payload);
      inbox.pop_front();
      progress = true;
      continue;
    }
    if (p.type == PacketType::MemReadReq) {
      Packet resp;
      resp.type = PacketType::MemReadResp;
      resp.tag = p.tag;
      resp.index = p.index;
      resp.dest0 = resp.dest1 = kHostCoord;
      resp.payload = config_read(p.mem_addr());
      outbox.push_back(resp);
      inbox.pop_front();
      progress = true;
      continue;
    }
    if (!p.is_spike()) {  // sync and responses are host-side artifacts
      inbox.pop_front();
      continue;
    }
    // Tag filter: non-target CCs inside a multicast rectangle drop here.
    if (p.index >= fan_in.dt.size() || !fan_in.dt[p.index].occupied ||
        fan_in.dt[p.index].tag != p.tag) {
      drops++;
      inbox.pop_front();
      progress = true;
      continue;
    }
    const FanInDE& de = fan_in.dt[p.index];
    // Count events per NC, check capacity, then dispatch.
    std::array<uint32_t, kNcsPerCc> need{};
    decode_fanin(de, fan_in.it, p.payload,
                 [&](int n, const InputEvent&) { need[n]++; });
    bool fits = true;
    for (int n = 0; n < kNcsPerCc; n++) {
      if (need[n] && nc[n].buffered_events() + need[n] > nc[n].buffer_cap()) {
        fits = false;
        break;
      }
    }
    if (!fits) break;
    decode_fanin(de, fan_in.it, p.payload,
                 [&](int n, const InputEvent& ev) {
                   if (!nc[n].enqueue(ev))
                     throw SimError("NC buffer overflow after capacity check");
                   dispatch_cycles++;
                 });
    inbox.pop_front();
    progress = true;
  }
  // Event-driven integration; INTEG-stage sends (relay cores) fan out now.
  for (int n = 0; n < kNcsPerCc; n++) {
    if (nc[n].buffered_events() == 0) continue;
    nc[n].phase = Phase::INTEG;
    nc[n].process_events();
    progress = true;
    if (!nc[n].output_events().empty()) {
      for (const auto& ev : nc[n].output_events())
        fanout_event(ev, static_cast<uint16_t>(n * NeuronCore::kMaxNeurons +
                                               ev.neuron),
                     now);
      nc[n].output_events().clear();
    }
  }
  return progress;
}

void CorticalColumn::finalize_programs() {
  for (int n = 0; n < kNcsPerCc; n++) {
    const auto& img = prog_img_[n];
    if (img.empty()) continue;
    std::vector<uint32_t> words(img.size() / 2);
    for (size_t i = 0; i < words.size(); i++)
      words[i] = static_cast<uint32_t>(img[2 * i]) |
                 (static_cast<uint32_t>(img[2 * i + 1]) << 16);
    nc[n].load_program(Program::decode(words));
  }
}

void CorticalColumn::run_fire(uint64_t now) {
  // Delayed spikes recorded D timesteps ago re-emit through the delayed IE
  // ranges of their (shared) fan-out DEs.
  const auto due = delayed_.find(now);
  if (due != delayed_.end()) {
    for (const uint16_t id : due->second) {
      const FanOutDE& de = fan_out.dt[id];
      for (uint32_t i = de.dly_offset; i < de.dly_offset + de.dly_count; i++) {
        if (i >= fan_out.it.size())
          throw SimError("delayed IE range outside the fan-out IT");
        emit_ie_packet(fan_out.it[i], fan_out.it[i].axon, false);
      }
    }
    delayed_.erase(due);
  }
  for (int n = 0; n < kNcsPerCc; n++) {
    nc[n].phase = Phase::FIRE;
    nc[n].run_fire();
    for (const auto& ev : nc[n].output_events()) {
      const uint16_t id =
          static_cast<uint16_t>(n * NeuronCore::kMaxNeurons + ev.neuron);
      if (ev.type == kSendNormal || ev.type == kSendDelayed) {
        spikes_fired++;
        if (id < layer_of.size() && layer_of[id] >= 0 &&
            static_cast<size_t>(layer_of[id]) < layer_spikes.size())
          layer_spikes[layer_of[id]]++;
      }
      fanout_event(ev, id, now);
    }
    nc[n].output_events().clear();
    nc[n].phase = Phase::RESTING;
  }
}

void CorticalColumn::fanout_event(const OutputEvent& ev, uint16_t cc_local_id,
                                  uint64_t now) {
  if (cc_local_id >= fan_out.dt.size())
    throw SimError("fired neuron id " + std::to_string(cc_local_id) +
                   " beyond the fan-out DT");
  const FanOutDE& de = fan_out.dt[cc_local_id];
  const bool value = ev.type == kSendValue;
  for (uint32_t i = de.fwd_offset; i < de.fwd_offset + de.fwd_count; i++) {
    if (i >= fan_out.it.size())
      throw SimError("forward IE range outside the fan-out IT");
    const FanOutIE& ie = fan_out.it[i];
    emit_ie_packet(ie, value ? ev.data : ie.axon, value);
  }
  if (ev.type == kSendDelayed && de.dly_count > 0)
    delayed_[now + de.delay].push_back(cc_local_id);
}

void CorticalColumn::emit_ie_packet(const FanOutIE& ie, uint16_t payload,
                                    bool value) {
  Packet p;
  p.type = ie.mode == kRouteBroadcast   ? PacketType::SpikeBroadcast
           : ie.mode == kRouteMulticast ? PacketType::SpikeMulticast
                                        : PacketType::SpikeUnicast;
  p.tag = ie.tag;
  p.index = ie.index;
  p.dest0 = ie.d0;
  p.dest1 = ie.d1;
  p.payload = payload;
  // Host-bound packets carry the value/spike distinction in tag bit 0;
  // there is no directory table on the host side to give the tag meaning.
  if (ie.d0 == kHostCoord) p.tag = value ? 1 : 0;
  outbox.push_back(p);
}

bool CorticalColumn::quiescent() const {
  if (!inbox.empty() || !outbox.empty()) return false;
  for (const auto& core : nc)
    if (core.buffered_events() != 0) return false;
  return true;
}

void CorticalColumn::config_write(uint32_t addr, uint16_t v) {
  using namespace cfg;
  if (addr < kNcProgBase) {
    const int n = addr / kNcDataStride;
    const uint32_t off = addr % kNcDataStride;
    auto& data = nc[n].data();
    if (off >= data.size()) throw SimError("config write beyond NC data");
    data[off] = v;
    return;
  }
  if (addr < kNcRegBase) {
    const int n = (addr - kNcProgBase) / kNcProgStride;
    const uint32_t off = (addr - kNcProgBase) % kNcProgStride;
    auto& img = prog_img_[n];
    if (off >= img.size()) img.resize(off + 1, 0);
    img[off] = v;
    return;
  }
  if (addr < kFanInDtBase) {
    const int n = (addr - kNcRegBase) / kNcRegStride;
    const uint32_t off = (addr - kNcRegBase) % kNcRegStride;
    if (off < 256) {
      nc[n].set_block_base(static_cast<uint16_t>(off), v);
    } else if (off == kNcRegHosted) {
      nc[n].set_neurons_hosted(v);
    } else {
      throw SimError("unmapped NC register offset");
    }
    return;
  }
  if (addr < kFanInItBase) {
    const uint32_t i = (addr - kFanInDtBase) / 4, f = (addr - kFanInDtBase) % 4;
    if (i >= kMaxFanInDes) throw SimError("fan-in DT config address out of range");
    if (fan_in.dt.size() <= i) fan_in.dt.resize(i + 1);
    FanInDE& de = fan_in.dt[i];
    switch (f) {
      case 0:
        de.tag = v >> 8;
        de.ie_type = (v >> 2) & 3;
        de.value_carrying = (v >> 1) & 1;
        de.occupied = v & 1;
        break;
      case 1: de.it_offset = v; break;
      case 2: de.it_count = v; break;
      default: break;  // padding word
    }
    return;
  }
  if (addr < kFanOutDtBase) {
    const uint32_t i = (addr - kFanInItBase) / 4, f = (addr - kFanInItBase) % 4;
    if (i >= kMaxFanInIes) throw SimError("fan-in IT config address out of range");
    if (fan_in.it.size() <= i) fan_in.it.resize(i + 1);
    FanInIE& ie = fan_in.it[i];
    switch (f) {
      case 0:
        ie.nc = v & 7;
        ie.mask = v >> 8;
        break;
      case 1: ie.neuron = v; break;
      case 2: ie.aux = v; break;
      case 3: ie.count = v; break;
    }
    return;
  }
  if (addr < kFanOutItBase) {
    const uint32_t i = (addr - kFanOutDtBase) / 8,
                   f = (addr - kFanOutDtBase) % 8;
    if (i >= kMaxFanOutDes) throw SimError("fan-out DT config address out of range");
    if (fan_out.dt.size() <= i) fan_out.dt.resize(i + 1);
    FanOutDE& de = fan_out.dt[i];
    switch (f) {
      case 0: de.global_axon = v; break;
      case 1: de.fwd_offset = v; break;
      case 2: de.fwd_count = v; break;
      case 3: de.dly_offset = v; break;
      case 4: de.dly_count = v; break;
      case 5: de.delay = v; break;
      default: break;
    }
    return;
  }
  if (addr < kEnd) {
    const uint32_t i = (addr - kFanOutItBase) / 4,
                   f = (addr - kFanOutItBase) % 4;
    if (i >= kMaxFanOutIes) throw SimError("fan-out IT config address out of range");
    if (fan_out.it.size() <= i) fan_out.it.resize(i + 1);
    FanOutIE& ie = fan_out.it[i];
    switch (f) {
      case 0:
        ie.d0.col = v & 0xF;
        ie.d0.row = (v >> 4) & 0xF;
        ie.d1.col = (v >> 8) & 0xF;
        ie.d1.row = (v >> 12) & 0xF;
        break;
      case 1:
        ie.mode = v & 3;
        ie.tag = v >> 8;
        break;
      case 2: ie.index = v; break;
      case 3: ie.axon = v; break;
    }
    return;
  }
  throw SimError("unmapped config address " + std::to_string(addr));
}

uint16_t CorticalColumn::config_read(uint32_t addr) const {
  using namespace cfg;
  if (addr < kNcProgBase) {
    const int n = addr / kNcDataStride;
    const uint32_t off = addr % kNcDataStride;
    const auto& data = nc[n].data();
    if (off >= data.size()) throw SimError("config read beyond NC data");
    return data[off];
  }
  if (addr < kNcRegBase) {
    const int n = (addr - kNcProgBase) / kNcProgStride;
    const uint32_t off = (addr - kNcProgBase) % kNcProgStride;
    const auto& img = prog_img_[n];
    return off < img.size() ? img[off] : 0;
  }
  if (addr < kFanInDtBase) {
    const int n = (addr - kNcRegBase) / kNcRegStride;
    const uint32_t off = (addr - kNcRegBase) % kNcRegStride;
    if (off < 256) return nc[n].block_base(static_cast<uint16_t>(off));
    if (off == kNcRegHosted) return nc[n].neurons_hosted();
    throw SimError("unmapped NC register offset");
  }
  if (addr < kFanInItBase) {
    const uint32_t i = (addr - kFanInDtBase) / 4, f = (addr - kFanInDtBase) % 4;
    if (i >= fan_in.dt.size()) return 0;
    const FanInDE& de = fan_in.dt[i];
    switch (f) {
      case 0:
        return static_cast<uint16_t>((de.tag << 8) | (de.ie_type << 2) |
                                     (de.value_carrying ? 2 : 0) |
                                     (de.occupied ? 1 : 0));
      case 1: return de.it_offset;
      case 2: return de.it_count;
      default: return 0;
    }
  }
  if (addr < kFanOutDtBase) {
    const uint32_t i = (addr - kFanInItBase) / 4, f = (addr - kFanInItBase) % 4;
    if (i >= fan_in.it.size()) return 0;
    const FanInIE& ie = fan_in.it[i];
    switch (f) {
      case 0: return static_cast<uint16_t>((ie.mask << 8) | ie.nc);
      case 1: return ie.neuron;
      case 2: return ie.aux;
      default: return ie.count;
    }
  }
  if (addr < kFanOutItBase) {
    const uint32_t i = (addr - kFanOutDtBase) / 8,
                   f = (addr - kFanOutDtBase) % 8;
    if (i >= fan_out.dt.size()) return 0;
    const FanOutDE& de = fan_out.dt[i];
    switch (f) {
      case 0: return de.global_axon;
      case 1: return de.fwd_offset;
      case 2: return de.fwd_count;
      case 3: return de.dly_offset;
      case 4: return de.dly_count;
      case 5: return de.delay;
      default: return 0;
    }
  }
  if (addr < kEnd) {
    const uint32_t i = (addr - kFanOutItBase) / 4,
                   f = (addr - kFanOutItBase) % 4;
    if (i >= fan_out.it.size()) return 0;
    const FanOutIE& ie = fan_out.it[i];
    switch (f) {
      case 0:
        return static_cast<uint16_t>(ie.d0.col | (ie.d0.row << 4) |
                                     (ie.d1.col << 8) | (ie.d1.row << 12));
      case 1: return static_cast<uint16_t>((ie.tag << 8) | ie.mode);
      case 2: return ie.index;
      case 3: return ie.axon;
    }
  }
  throw SimError("unmapped config address " + std::to_string(addr));
}

}  // namespace taibai
