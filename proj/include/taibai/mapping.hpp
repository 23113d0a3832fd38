#pragma once

#include <cstdint>
#include <vector>

#include "taibai/ir.hpp"

// Network partition: populations onto neuron cores.
//
// Every logical neuron expands to `members` physical units on one core,
// laid out member-major: unit(m, i) sits at local id base + m*B + i, where
// B is the core's logical-neuron count for that population.
//
//   members == 1           plain neuron, receives weighted events directly
//   members == M+1         M accumulator units (fan-in expansion PSUMs, or
//                          DH-LIF dendrite branches) plus one soma; the
//                          accumulators forward their currents intra-core
//
// Fan-in expansion is automatic: a neuron whose fan-in exceeds the limit is
// split by slot chunks across PSUM members. DH-LIF populations always carry
// one member per dendrite branch.

namespace taibai {

struct CompileOptions {
  int rows = 11;
  int cols = 12;
  enum class Target { MinCores, MaxThroughput };
  Target target = Target::MaxThroughput;
  enum class Placement { None, Greedy, Annealing };
  Placement placement = Placement::Greedy;
  uint64_t seed = 1;
  int profile_timesteps = 8;
  double profile_rate = 0.1;
  uint32_t fanin_limit = 2048;
  uint32_t fanout_de_capacity = 8;
  double cycle_margin = 1.2;
  bool sparse_type1 = false;  // throughput mode: type-1 sparse entries
  size_t nc_data_words = 32 * 1024;
};

// One population's residency on one neuron core.
struct NcAlloc {
  int pop = 0;
  int cc = 0;  // logical CC id
  int nc = 0;
  uint16_t slot_base = 0;   // first local unit id
  int b = 0;                // logical neurons on this core (per member)
  int logical_lo = 0;       // flat logical range [lo, lo+b)
  // conv placement: channels and spatial positions hosted
  int chan_lo = 0, chan_hi = 0;
  int pos_lo = 0, pos_hi = 0;
  bool conv_layout = false;  // local id = ((q-pos_lo)*cpn + c_rel)*?? see docs
  int cpn = 0;               // channels per core (conv)
};

struct PopPlan {
  int members = 1;           // 1 or accumulators+1
  uint32_t chunk = 0;        // FC/conv member chunk (axon-space units)
  bool chunk_by_rank = false;  // sparse: chunk over per-neuron slot ranks
  std::vector<int> allocs;   // indices into Mapping::allocs
};

struct UnitLoc {
  int cc = -1;
  int nc = 0;
  uint16_t local = 0;
};

struct Mapping {
  std::vector<NcAlloc> allocs;
  std::vector<PopPlan> pops;
  int num_ccs = 0;
  int num_ncs = 0;

  // Locates member m of logical neuron `id` of population p.
  UnitLoc locate(const LoweredNet& net, int p, uint32_t id, int m) const;
  // The fan-in representation chunk count (members minus the soma, or 1).
  int accumulators(int p) const {
    return pops[p].members == 1 ? 1 : pops[p].members - 1;
  }
};

// Computes each neuron's fan-in (weighted slots) per population.
std::vector<std::vector<uint32_t>> fanin_counts(const LoweredNet& net);

Mapping partition(const LoweredNet& net, const CompileOptions& opt);

// Merges underutilized cores hosting the same operator (identical program
// shape and compatible resources); MinCores only — MaxThroughput keeps the
// partition as-is. Returns the number of merges performed.
int merge_cores(Mapping& m, const LoweredNet& net, const CompileOptions& opt);

}  // namespace taibai
