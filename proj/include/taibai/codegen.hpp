#pragma once

#include <string>
#include <vector>

#include "taibai/artifact.hpp"
#include "taibai/mapping.hpp"
#include "taibai/placement.hpp"

namespace taibai {

// Storage accounting for the topology tables. Directory entries count 32
// bits; information entries count 16 bits per logical field (type 0: 1
// field, type 1: 2, types 2/3: 4, fan-out IEs: 4).
struct StorageCounts {
  uint64_t fanin_des = 0;
  uint64_t fanin_ies = 0;
  uint64_t fanin_ie_bits = 0;
  uint64_t fanin_ies_by_type[4] = {0, 0, 0, 0};
  uint64_t fanout_des = 0;
  uint64_t fanout_ies = 0;

  uint64_t entries() const {
    return fanin_des + fanin_ies + fanout_des + fanout_ies;
  }
  uint64_t bits() const {
    return fanin_des * 32 + fanin_ie_bits + fanout_des * 32 +
           fanout_ies * 64;
  }
};

struct CompileReport {
  int num_ccs = 0;
  int num_ncs = 0;
  int merges = 0;
  uint64_t objective_initial = 0;
  uint64_t objective_final = 0;
  StorageCounts storage;
  uint64_t cycle_budget = 0;
  std::string to_text() const;
};

// Program options for one population's cores (table addresses unresolved;
// codegen fills them per core). Used both for code generation and as the
// merge-compatibility key.
PresetOptions preset_options_for_pop(const LoweredNet& net,
                                     const CompileOptions& opt, int pop);
std::string merge_key(const LoweredNet& net, const CompileOptions& opt,
                      int pop);

// Generates programs, data images, topology tables and the config-packet
// stream for a partitioned, placed network.
Artifact codegen(const LoweredNet& net, const Mapping& map,
                 const Placement& place, const CompileOptions& opt,
                 StorageCounts* storage = nullptr);

// Splits an over-capacity fan-out IE list across duplicate units; the union
// of the chunks equals the original list.
std::vector<std::vector<FanOutIE>> expand_fanout(
    const std::vector<FanOutIE>& ies, size_t capacity);

// Full pipeline: partition, merge (per target), zigzag placement, optional
// traffic profiling + placement optimization, final code generation.
struct CompileResult {
  Artifact artifact;
  CompileReport report;
  Placement placement;
  Mapping mapping;
};
CompileResult compile_network(const LoweredNet& net,
                              const CompileOptions& opt);

// Delivered spike packets per (logical src cc, logical dst cc) from a short
// seeded Poisson calibration run on the given placement.
Traffic profile_traffic(const Artifact& art, const Placement& place,
                        const CompileOptions& opt);

}  // namespace taibai
