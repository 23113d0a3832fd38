#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "taibai/packet.hpp"

namespace taibai {

// Router ports in arbitration priority order.
enum Port : int { kPortN = 0, kPortE = 1, kPortS = 2, kPortW = 3, kPortL = 4 };
inline constexpr int kNumPorts = 5;

// One routing decision: local delivery plus forwarded copies. All routing is
// destination-driven:
//   - point-to-point: X (column) first, then Y (row);
//   - regional multicast: shortest path to the rectangle, then a
//     deterministic in-region tree that spreads along the entry column
//     (phase 1) and from it along rows (phase 2);
//   - broadcast: the same tree over the full-grid rectangle.
// Every CC inside the destination rectangle receives the packet exactly
// once; CCs outside receive it zero times.
struct RouteDecision {
  bool deliver = false;
  struct Hop {
    int port;
    uint8_t phase;
  };
  std::array<Hop, 4> hops{};
  int hop_count = 0;
  void add(int port, uint8_t phase) { hops[hop_count++] = {port, phase}; }
};

RouteDecision route_next_hops(Coord at, const Packet& p, int in_port, int rows,
                              int cols);

struct RouterState {
  Coord coord;
  // Bounded input queue per port plus the packets a neighbor pushed this
  // cycle (merged into in_q at the cycle boundary so a packet advances at
  // most one hop per cycle).
  std::array<std::deque<Packet>, kNumPorts> in_q;
  std::array<std::deque<Packet>, kNumPorts> staged;
  std::array<uint64_t, kNumPorts> forwarded{};  // per output port
  size_t occupancy() const {
    size_t n = 0;
    for (const auto& q : in_q) n += q.size();
    for (const auto& q : staged) n += q.size();
    return n;
  }
};

struct Delivery {
  Coord at;
  Packet packet;
};

// The 2D-mesh network. Advances in lockstep cycles; arbitration is
// deterministic (port priority N,E,S,W,local; FIFO within a port; one
// packet per output port per cycle). Queues are bounded; full queues stall
// the upstream packet, nothing is ever dropped.
class Mesh {
 public:
  Mesh(int rows, int cols, size_t queue_cap = 16);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  bool inject(Coord at, const Packet& p);  // false = injection queue full
  void step();                             // one network cycle

  // Packets that reached their local port this cycle (and previous cycles,
  // until drained by the caller).
  std::vector<Delivery>& deliveries() { return deliveries_; }

  bool idle() const;  // no packet anywhere in the mesh
  size_t in_flight() const;
  uint64_t injected() const { return injected_; }
  uint64_t delivered() const { return delivered_; }
  // Extra copies created by multicast/broadcast forks; at every cycle
  // boundary, injected + duplicated == delivered + in_flight.
  uint64_t duplicated() const { return duplicated_; }
  uint64_t link_traversals() const { return link_traversals_; }
  uint64_t cycles() const { return cycles_; }

  RouterState& router(Coord c) { return routers_[c.row * cols_ + c.col]; }
  const RouterState& router(Coord c) const {
    return routers_[c.row * cols_ + c.col];
  }

 private:
  int rows_, cols_;
  size_t queue_cap_;
  std::vector<RouterState> routers_;
  std::vector<Delivery> deliveries_;
  uint64_t injected_ = 0;
  uint64_t delivered_ = 0;
  uint64_t duplicated_ = 0;
  uint64_t link_traversals_ = 0;
  uint64_t cycles_ = 0;
};

}  // namespace taibai
