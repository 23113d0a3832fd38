#pragma once

#include <cstdint>
#include <vector>

#include "taibai/mapping.hpp"
#include "taibai/packet.hpp"

namespace taibai {

// Placement of logical CCs onto grid coordinates (injective).
struct Placement {
  int rows = 11, cols = 12;
  std::vector<Coord> at;  // logical cc -> coordinate

  Coord of(int cc) const { return at[cc]; }
  bool operator==(const Placement&) const = default;
};

// Per-flow delivered-packet counts between logical CCs.
struct Traffic {
  int n = 0;
  std::vector<uint64_t> flows;  // n*n, [src*n + dst]
  uint64_t& flow(int s, int d) { return flows[s * n + d]; }
  uint64_t flow(int s, int d) const { return flows[s * n + d]; }
};

// Sum over flows of packets * Manhattan distance.
uint64_t placement_objective(const Placement& p, const Traffic& t);

// Boustrophedon scan: row 0 left to right, row 1 right to left, ...
Placement place_initial(int num_ccs, int rows, int cols);

// Never returns a placement worse than the input. Greedy runs
// best-improvement swaps (including moves to free cells) to a local
// optimum; annealing runs a seeded geometric-cooling schedule and keeps
// the best placement seen.
Placement optimize_greedy(const Placement& initial, const Traffic& t,
                          int max_rounds = 1000);
Placement optimize_annealing(const Placement& initial, const Traffic& t,
                             uint64_t seed, int epochs = 200,
                             int swaps_per_epoch = 100, double cooling = 0.95);

}  // namespace taibai
