#include "taibai/artifact.hpp"

#include <cstring>
#include <fstream>

#include "taibai/config_words.hpp"
#include "taibai/presets.hpp"

namespace taibai {

namespace {

void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back(v >> 8);
}
void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  for (int i = 0; i < 4; i++) b.push_back((v >> (8 * i)) & 0xFF);
}
void put_u64(std::vector<uint8_t>& b, uint64_t v) {
  for (int i = 0; i < 8; i++) b.push_back((v >> (8 * i)) & 0xFF);
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t at = 0;
  uint8_t u8() {
    if (at >= b.size()) throw SimError("artifact truncated");
    return b[at++];
  }
  uint16_t u16() { return u8() | (static_cast<uint16_t>(u8()) << 8); }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; i++) v |= static_cast<uint32_t>(u8()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= static_cast<uint64_t>(u8()) << (8 * i);
    return v;
  }
};

void put_fanout_ie(std::vector<uint8_t>& b, const FanOutIE& ie) {
  put_u16(b, static_cast<uint16_t>(ie.d0.col | (ie.d0.row << 4) |
                                   (ie.d1.col << 8) | (ie.d1.row << 12)));
  put_u16(b, static_cast<uint16_t>((ie.tag << 8) | ie.mode));
  put_u16(b, ie.index);
  put_u16(b, ie.axon);
}

FanOutIE get_fanout_ie(Reader& r) {
  FanOutIE ie;
  const uint16_t rect = r.u16();
  ie.d0.col = rect & 0xF;
  ie.d0.row = (rect >> 4) & 0xF;
  ie.d1.col = (rect >> 8) & 0xF;
  ie.d1.row = (rect >> 12) & 0xF;
  const uint16_t tm = r.u16();
  ie.mode = tm & 3;
  ie.tag = tm >> 8;
  ie.index = r.u16();
  ie.axon = r.u16();
  return ie;
}

}  // namespace

std::vector<uint8_t> Artifact::to_bytes() const {
  std::vector<uint8_t> b;
  b.insert(b.end(), kMagic, kMagic + 4);
  put_u32(b, version);
  put_u16(b, rows);
  put_u16(b, cols);
  put_u16(b, num_ccs);
  put_u32(b, timesteps);
  put_u64(b, cycle_budget);
  put_u32(b, static_cast<uint32_t>(placement.size()));
  for (const Coord c : placement) {
    b.push_back(c.row);
    b.push_back(c.col);
  }
  put_u64(b, config_stream.size());
  for (const Packet& p : config_stream) put_u64(b, p.encode());
  put_u32(b, static_cast<uint32_t>(host_inputs.size()));
  for (const auto& h : host_inputs) {
    put_u32(b, static_cast<uint32_t>(h.ies.size()));
    for (const auto& ie : h.ies) put_fanout_ie(b, ie);
  }
  put_u32(b, static_cast<uint32_t>(pops.size()));
  for (const auto& p : pops) {
    put_u32(b, p.shape.c);
    put_u32(b, p.shape.h);
    put_u32(b, p.shape.w);
    b.push_back(p.model);
    b.push_back(p.learning);
    put_u32(b, static_cast<uint32_t>(p.somas.size()));
    for (const auto& s : p.somas) {
      b.push_back(s.coord.row);
      b.push_back(s.coord.col);
      b.push_back(s.nc);
      put_u16(b, s.local);
      put_u16(b, s.block_base);
    }
  }
  return b;
}

Artifact Artifact::from_bytes(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  char magic[4];
  for (auto& m : magic) m = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw SimError("bad artifact magic (want TBAI)");
  Artifact a;
  a.version = r.u32();
  if (a.version != 1) throw SimError("unsupported artifact version");
  a.rows = r.u16();
  a.cols = r.u16();
  a.num_ccs = r.u16();
  a.timesteps = r.u32();
  a.cycle_budget = r.u64();
  a.placement.resize(r.u32());
  for (auto& c : a.placement) {
    c.row = r.u8();
    c.col = r.u8();
  }
  a.config_stream.resize(r.u64());
  for (auto& p : a.config_stream) p = Packet::decode(r.u64());
  a.host_inputs.resize(r.u32());
  for (auto& h : a.host_inputs) {
    h.ies.resize(r.u32());
    for (auto& ie : h.ies) ie = get_fanout_ie(r);
  }
  a.pops.resize(r.u32());
  for (auto& p : a.pops) {
    p.shape.c = static_cast<int>(r.u32());
    p.shape.h = static_cast<int>(r.u32());
    p.shape.w = static_cast<int>(r.u32());
    p.model = r.u8();
    p.learning = r.u8();
    p.somas.resize(r.u32());
    for (auto& s : p.somas) {
      s.coord.row = r.u8();
      s.coord.col = r.u8();
      s.nc = r.u8();
      s.local = r.u16();
      s.block_base = r.u16();
    }
  }
  if (r.at != bytes.size()) throw SimError("artifact has trailing bytes");
  return a;
}

void Artifact::save(const std::string& path) const {
  const auto bytes = to_bytes();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SimError("cannot write artifact: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Artifact Artifact::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError("cannot open artifact: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

uint32_t Artifact::var_addr(int pop, uint32_t neuron, uint16_t var) const {
  const SomaLoc& s = pops[pop].somas[neuron];
  return cfg::kNcDataBase + s.nc * cfg::kNcDataStride + s.block_base + var;
}

void load_artifact(Chip& chip, const Artifact& art, bool via_packets) {
  if (art.rows != chip.rows() || art.cols != chip.cols())
    throw SimError("artifact grid shape does not match the chip");
  for (const Coord c : art.placement)
    if (c.row >= art.rows || c.col >= art.cols)
      throw SimError("artifact placement outside the grid");
  if (via_packets) {
    chip.replay_config_packets(art.config_stream);
  } else {
    for (const Packet& p : art.config_stream)
      chip.config_write_direct(p.dest0, p.mem_addr(), p.payload);
  }
  chip.set_layer_count(art.pops.size());
  chip.finalize_init();
  chip.set_host_input_map(art.host_inputs);
  std::vector<uint64_t> layer_neurons;
  for (size_t p = 0; p < art.pops.size(); p++) {
    layer_neurons.push_back(art.pops[p].shape.size());
    for (const auto& s : art.pops[p].somas) {
      auto& cc = chip.cc(s.coord);
      cc.layer_of[s.nc * NeuronCore::kMaxNeurons + s.local] =
          static_cast<int32_t>(p);
    }
  }
  chip.set_layer_neurons(std::move(layer_neurons));
}

}  // namespace taibai
