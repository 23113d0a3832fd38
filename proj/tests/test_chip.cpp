#include "taibai/chip.hpp"

#include <random>

#include "doctest.h"
#include "taibai/config_words.hpp"
#include "taibai/core_image.hpp"
#include "taibai/fp16.hpp"
#include "taibai/presets.hpp"

using namespace taibai;

namespace {

uint16_t F(float f) { return fp16::from_float(f); }

// Hand-built two-layer net: 2 host inputs -> layer A (4 LIF, CC(0,0) NC0)
// -> layer B (2 LIF, CC(0,1) NC0) -> host. All-to-all, weights chosen so
// arithmetic is exact: A weights 0.5 (vth 1.0), B weights 0.25 (vth 0.5),
// tau 0 everywhere.
struct TwoLayerNet {
  cfg::Words words[2];  // per CC
  std::vector<HostFanout> host_map;

  TwoLayerNet(bool multicast_ab = false) {
    // Layer A on CC(0,0).
    {
      cfg::Words& w = words[0];
      std::vector<NeuronBlock> blocks(4);
      for (int n = 0; n < 4; n++) {
        blocks[n].vars = lif_vars(0, F(0.0f), 0, F(1.0f));
        blocks[n].weights = {F(0.5f), F(0.5f)};  // dense by input index
      }
      std::vector<uint16_t> data(1024, 0);
      std::vector<uint16_t> bases;
      place_blocks(data, bases, blocks, 0);
      cfg::append_nc_data(w, 0, 0, data);
      for (int n = 0; n < 4; n++)
        cfg::append_block_base(w, 0, static_cast<uint16_t>(n), bases[n]);
      cfg::append_neurons_hosted(w, 0, 4);
      cfg::append_program(w, 0, build_preset({}));
      // Fan-in: DT[0] tag 1, type 2, one IE fanning to NC0 ids 0..3.
      FanInDE de;
      de.occupied = true;
      de.tag = 1;
      de.ie_type = 2;
      de.it_offset = 0;
      de.it_count = 1;
      cfg::append_fanin_de(w, 0, de);
      FanInIE ie;
      ie.mask = 0x01;
      ie.neuron = 0;
      ie.aux = 1;  // margin
      ie.count = 4;
      cfg::append_fanin_ie(w, 0, ie);
      // Fan-out: each A neuron -> CC(0,1) DT[0], axon = its index.
      for (int n = 0; n < 4; n++) {
        FanOutDE ode;
        ode.global_axon = static_cast<uint16_t>(n);
        ode.fwd_offset = static_cast<uint16_t>(n);
        ode.fwd_count = 1;
        cfg::append_fanout_de(w, static_cast<uint32_t>(n), ode);
        FanOutIE oie;
        oie.mode = multicast_ab ? kRouteMulticast : kRouteUnicast;
        oie.d0 = {0, 1};
        oie.d1 = multicast_ab ? Coord{0, 2} : Coord{0, 1};
        oie.tag = 2;
        oie.index = 0;
        oie.axon = static_cast<uint16_t>(n);
        cfg::append_fanout_ie(w, static_cast<uint32_t>(n), oie);
      }
    }
    // Layer B on CC(0,1).
    {
      cfg::Words& w = words[1];
      std::vector<NeuronBlock> blocks(2);
      for (int n = 0; n < 2; n++) {
        blocks[n].vars = lif_vars(0, F(0.0f), 0, F(0.5f));
        blocks[n].weights = {F(0.25f), F(0.25f), F(0.25f), F(0.25f)};
      }
      std::vector<uint16_t> data(1024, 0);
      std::vector<uint16_t> bases;
      place_blocks(data, bases, blocks, 0);
      cfg::append_nc_data(w, 0, 0, data);
      for (int n = 0; n < 2; n++)
        cfg::append_block_base(w, 0, static_cast<uint16_t>(n), bases[n]);
      cfg::append_neurons_hosted(w, 0, 2);
      cfg::append_program(w, 0, build_preset({}));
      FanInDE de;
      de.occupied = true;
      de.tag = 2;
      de.ie_type = 2;
      de.it_offset = 0;
      de.it_count = 1;
      cfg::append_fanin_de(w, 0, de);
      FanInIE ie;
      ie.mask = 0x01;
      ie.neuron = 0;
      ie.aux = 1;
      ie.count = 2;
      cfg::append_fanin_ie(w, 0, ie);
      // Fan-out to the host: index identifies the B neuron.
      for (int n = 0; n < 2; n++) {
        FanOutDE ode;
        ode.global_axon = static_cast<uint16_t>(n);
        ode.fwd_offset = static_cast<uint16_t>(n);
        ode.fwd_count = 1;
        cfg::append_fanout_de(w, static_cast<uint32_t>(n), ode);
        FanOutIE oie;
        oie.mode = kRouteUnicast;
        oie.d0 = oie.d1 = kHostCoord;
        oie.tag = 0;
        oie.index = static_cast<uint16_t>(100 + n);
        oie.axon = static_cast<uint16_t>(n);
        cfg::append_fanout_ie(w, static_cast<uint32_t>(n), oie);
      }
    }
    // Host input map: input i -> CC(0,0) DT[0] with axon i.
    host_map.resize(2);
    for (uint16_t i = 0; i < 2; i++) {
      FanOutIE ie;
      ie.mode = kRouteUnicast;
      ie.d0 = ie.d1 = {0, 0};
      ie.tag = 1;
      ie.index = 0;
      ie.axon = i;
      host_map[i].ies.push_back(ie);
    }
  }

  void load(Chip& chip, bool via_packets) {
    for (int c = 0; c < 2; c++) {
      const Coord at{0, static_cast<uint8_t>(c)};
      if (via_packets) {
        std::vector<Packet> stream;
        for (const auto& [addr, v] : words[c])
          stream.push_back(Packet::mem_write(at, addr, v));
        chip.replay_config_packets(stream);
      } else {
        for (const auto& [addr, v] : words[c])
          chip.config_write_direct(at, addr, v);
      }
    }
    chip.finalize_init();
    chip.set_host_input_map(host_map);
  }
};

RunStats run_net(int threads, bool via_packets, bool multicast_ab,
                 std::vector<HostEvent>* events_out = nullptr) {
  ChipOptions opt;
  opt.threads = threads;
  Chip chip(opt);
  TwoLayerNet net(multicast_ab);
  net.load(chip, via_packets);
  chip.step_timestep({{0, 0, false}, {1, 0, false}});  // t0: both inputs
  chip.step_timestep({{0, 0, false}});                 // t1: one input
  chip.step_timestep({});                              // t2: none
  chip.flush();
  if (events_out) *events_out = chip.host_events();
  return chip.stats();
}

}  // namespace

TEST_CASE("config space: write-then-read round-trips bit-exactly") {
  ChipOptions opt;
  opt.rows = 2;
  opt.cols = 2;
  Chip chip(opt);
  std::mt19937 rng(42);
  // A spread of addresses across every region.
  std::vector<uint32_t> addrs;
  for (int i = 0; i < 40; i++) {
    addrs.push_back(rng() % cfg::kNcProgBase);  // NC data
    addrs.push_back(cfg::kNcProgBase + rng() % (8 * cfg::kNcProgStride));
    addrs.push_back(cfg::kNcRegBase + (rng() % 8) * cfg::kNcRegStride +
                    rng() % 256);
    addrs.push_back(cfg::kFanInDtBase + rng() % 0x4000);
    addrs.push_back(cfg::kFanInItBase + rng() % 0x10000);
    addrs.push_back(cfg::kFanOutDtBase + rng() % 0x4000);
    addrs.push_back(cfg::kFanOutItBase + rng() % 0x10000);
  }
  const Coord at{1, 1};
  std::vector<uint16_t> want;
  for (const uint32_t a : addrs) {
    // Fields with sub-16-bit packing only hold their own bits; use values
    // that survive the pack/unpack of every region.
    uint16_t v = static_cast<uint16_t>(rng());
    if (a >= cfg::kFanInItBase && a < cfg::kFanOutDtBase && a % 4 == 0)
      v &= 0xFF07;  // IE word 0: mask|nc
    if (a >= cfg::kFanInDtBase && a < cfg::kFanInItBase && a % 4 == 0)
      v &= 0xFF0F;  // DE word 0: tag|type|value|occupied
    if (a >= cfg::kFanInDtBase && a < cfg::kFanInItBase && a % 4 >= 3)
      v = 0;  // DE padding word reads back 0
    if (a >= cfg::kFanOutDtBase && a < cfg::kFanOutItBase && a % 8 >= 6)
      v = 0;
    if (a >= cfg::kFanOutItBase && a % 4 == 1) v &= 0xFF03;
    chip.config_write_direct(at, a, v);
    want.push_back(v);
  }
  for (size_t i = 0; i < addrs.size(); i++) {
    CAPTURE(addrs[i]);
    REQUIRE(chip.host_read(at, addrs[i]) == want[i]);
  }
}

TEST_CASE("two-layer hand-built net computes the expected spikes") {
  std::vector<HostEvent> events;
  const RunStats s = run_net(1, false, false, &events);
  // t0: both A inputs spike -> all four A neurons at threshold -> fire;
  // B sees 4*0.25 = 1.0 >= 0.5 at t1 -> both B fire at t1.
  REQUIRE(events.size() == 2);
  for (const auto& ev : events) {
    CHECK(ev.t == 1);
    CHECK_FALSE(ev.value);
    CHECK((ev.index == 100 || ev.index == 101));
  }
  CHECK(s.spikes == 6);     // 4 A + 2 B
  CHECK(s.sop_count == 20); // 8 (t0 inputs) + 4 (t1 input) + 8 (B accums)
  // Inputs: 3 unicasts; A->B: 4; B->host: 2.
  CHECK(s.packets_unicast == 9);
  CHECK(s.packets_multicast == 0);
  CHECK(s.tag_drops == 0);
}

TEST_CASE("INIT via config packets equals direct loading") {
  std::vector<HostEvent> ev_direct, ev_packets;
  const RunStats a = run_net(1, false, false, &ev_direct);
  const RunStats b = run_net(1, true, false, &ev_packets);
  CHECK(ev_direct == ev_packets);
  CHECK(a.sop_count == b.sop_count);
  CHECK(a.spikes == b.spikes);
  CHECK(a.packets_unicast == b.packets_unicast);
}

TEST_CASE("multicast rectangle with a non-target CC: drops counted there") {
  std::vector<HostEvent> events;
  const RunStats s = run_net(1, false, true, &events);
  REQUIRE(events.size() == 2);  // same outcome as unicast
  // Four A spikes also hit CC(0,2), which has no matching DT entry.
  CHECK(s.tag_drops == 4);
  CHECK(s.packets_multicast == 4);
}

TEST_CASE("zero-input run: zero SOPs, zero spike packets") {
  ChipOptions opt;
  Chip chip(opt);
  TwoLayerNet net;
  net.load(chip, false);
  for (int t = 0; t < 5; t++) chip.step_timestep({});
  chip.flush();
  const RunStats s = chip.stats();
  CHECK(s.sop_count == 0);
  CHECK(s.spikes == 0);
  CHECK(s.packets_unicast == 0);
  CHECK(s.packets_multicast == 0);
  CHECK(chip.host_events().empty());
}

TEST_CASE("identical runs and different thread counts give identical results") {
  std::vector<HostEvent> e1, e2, e4;
  const RunStats s1 = run_net(1, false, false, &e1);
  const RunStats s2 = run_net(2, false, false, &e2);
  const RunStats s4 = run_net(4, false, false, &e4);
  CHECK(s1 == s2);
  CHECK(s1 == s4);
  CHECK(e1 == e2);
  CHECK(e1 == e4);
  const RunStats again = run_net(1, false, false);
  CHECK(s1 == again);
}

TEST_CASE("estimate: energy is linear in the counters") {
  RunStats s;
  s.sop_count = 1'000'000'000;
  s.wall_cycles = 1000;
  CostModel cm;
  const Estimate e = estimate(s, cm);
  CHECK(e.energy_j == doctest::Approx(2.61e-3).epsilon(1e-12));
  CHECK(e.energy_j == static_cast<double>(s.sop_count) * cm.e_sop);
  CostModel cm2 = cm;
  cm2.e_sop *= 2;
  CHECK(estimate(s, cm2).energy_j == 2 * e.energy_j);
  // Zero activity: only static power remains.
  RunStats idle;
  idle.wall_cycles = 500'000;
  CostModel cm3;
  cm3.p_static = 1.5;
  const double elapsed = 500'000 * cm3.cycle_time;
  CHECK(estimate(idle, cm3).energy_j == doctest::Approx(1.5 * elapsed));
}
