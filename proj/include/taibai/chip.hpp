#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "taibai/cortical_column.hpp"
#include "taibai/noc.hpp"

namespace taibai {

// Energy/throughput cost model; linear in the run counters.
struct CostModel {
  double e_sop = 2.61e-12;   // J per synaptic operation
  double e_hop = 0.0;        // J per packet link traversal
  double p_static = 0.0;     // W
  double cycle_time = 2e-9;  // s (500 MHz)
};

struct RunStats {
  uint64_t timesteps = 0;
  uint64_t sop_count = 0;
  uint64_t spikes = 0;
  uint64_t packets_unicast = 0;
  uint64_t packets_multicast = 0;
  uint64_t packets_broadcast = 0;
  uint64_t packets_mem = 0;
  uint64_t link_traversals = 0;
  uint64_t nc_busy_cycles = 0;
  uint64_t dispatch_cycles = 0;
  uint64_t tag_drops = 0;
  uint64_t wall_cycles = 0;
  std::vector<uint64_t> layer_spikes;
  std::vector<uint64_t> layer_neurons;  // for firing rates

  bool operator==(const RunStats&) const = default;
  std::string to_text(const CostModel& cm) const;
};

struct Estimate {
  double energy_j = 0;
  double avg_power_w = 0;
  double throughput_sps = 0;  // samples (T-step runs) per second
};
Estimate estimate(const RunStats& stats, const CostModel& cm);

// One host-side fan-out group of an input neuron.
struct HostFanout {
  std::vector<FanOutIE> ies;
};

// A packet that left the mesh toward the host.
struct HostEvent {
  uint64_t t = 0;        // timestep of the emitting FIRE stage
  uint16_t index = 0;    // source identity (per the artifact's layer table)
  uint16_t payload = 0;  // global axon id (spike) or FP16 value
  bool value = false;

  bool operator==(const HostEvent&) const = default;
  auto operator<=>(const HostEvent&) const = default;
};

struct ChipOptions {
  int rows = 11;
  int cols = 12;
  size_t queue_cap = 16;
  int threads = 1;
  // Exact quiescence detection with this diagnostic guard; in fixed-budget
  // mode the artifact's per-timestep cycle budget is enforced instead.
  uint64_t integ_cycle_limit = 50'000'000;
  bool fixed_budget = false;
  uint64_t cycle_budget = 0;
};

class WorkerPool;

// Whole-chip behavioral simulator: INIT, then (INTEG -> FIRE) per timestep.
// All CCs advance in lockstep phases; INTEG runs the NoC and schedulers to
// global quiescence before FIRE starts, so no fire segment ever runs while
// a spike of the current timestep is still in flight.
class Chip {
 public:
  explicit Chip(const ChipOptions& opt = {});
  ~Chip();

  int rows() const { return opt_.rows; }
  int cols() const { return opt_.cols; }
  CorticalColumn& cc(Coord c) { return ccs_[c.row * opt_.cols + c.col]; }
  const CorticalColumn& cc(Coord c) const {
    return ccs_[c.row * opt_.cols + c.col];
  }
  Mesh& mesh() { return mesh_; }

  // INIT-stage configuration. Packet replay feeds config packets through
  // the NoC exactly as a host would; direct mode applies the same writes
  // without network simulation (identical state, used for bulk loads).
  void config_write_direct(Coord c, uint32_t addr, uint16_t value);
  void replay_config_packets(const std::vector<Packet>& stream);
  void finalize_init();

  // Runtime monitoring: read one config word via request/response packets.
  uint16_t host_read(Coord c, uint32_t addr);
  // Runtime configuration write through the NoC (FIRE-stage window).
  void host_write(Coord c, uint32_t addr, uint16_t value);

  void set_host_input_map(std::vector<HostFanout> map) {
    host_inputs_ = std::move(map);
  }
  void set_layer_count(size_t layers);
  void set_layer_neurons(std::vector<uint64_t> counts);

  // Advances one timestep: injects the given input spikes (indices into the
  // host input map, with an optional FP16 payload for value inputs), runs
  // INTEG to quiescence, then FIRE. Host-bound packets emitted by this
  // timestep's FIRE are collected at the start of the next INTEG (or by
  // flush()).
  struct InputSpike {
    uint16_t neuron;
    uint16_t value = 0;  // payload override for value-carrying inputs
    bool is_value = false;
  };
  void step_timestep(const std::vector<InputSpike>& inputs);
  // Drains in-flight host-bound traffic after the last timestep.
  void flush();

  std::vector<HostEvent>& host_events() { return host_events_; }
  uint64_t timestep() const { return now_; }
  RunStats stats() const;

  // Traffic profiling: delivered spike packets keyed by
  // (src.row<<8|src.col, dst.row<<8|dst.col).
  void set_record_flows(bool on) { record_flows_ = on; }
  const std::map<std::pair<uint16_t, uint16_t>, uint64_t>& flows() const {
    return flows_;
  }

 private:
  void integ_until_quiescent(uint64_t budget);
  void drain_deliveries();
  bool inject_pending();
  void parallel_ccs(const std::function<void(CorticalColumn&)>& fn);

  ChipOptions opt_;
  Mesh mesh_;
  std::vector<CorticalColumn> ccs_;
  std::vector<HostFanout> host_inputs_;
  std::vector<Packet> pending_host_;  // host packets not yet injected
  std::vector<HostEvent> host_events_;
  std::vector<HostEvent> responses_;
  uint64_t now_ = 0;
  uint64_t wall_cycles_ = 0;
  uint64_t packets_[4] = {0, 0, 0, 0};  // uni, multi, bcast, mem
  size_t layer_count_ = 0;
  std::vector<uint64_t> layer_neurons_;
  bool record_flows_ = false;
  std::map<std::pair<uint16_t, uint16_t>, uint64_t> flows_;
  std::unique_ptr<WorkerPool> pool_;
};

}  // namespace taibai
