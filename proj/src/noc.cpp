#include "taibai/noc.hpp"

namespace taibai {

RouteDecision route_next_hops(Coord at, const Packet& p, int in_port, int rows,
                              int cols) {
  Coord d0 = p.dest0, d1 = p.dest1;
  if (d0 == kHostCoord && d1 == kHostCoord) d0 = d1 = Coord{0, 0};
  if (d0.row > d1.row || d0.col > d1.col)
    throw SimError("malformed dest_area: x0 > x1 or y0 > y1");
  if (d1.row >= rows || d1.col >= cols)
    throw SimError("dest_area outside grid");

  const int r = at.row, c = at.col;
  RouteDecision out;

  if (p.phase == kPhaseApproach) {
    const bool inside =
        r >= d0.row && r <= d1.row && c >= d0.col && c <= d1.col;
    if (!inside) {
      // Shortest path toward the rectangle, column dimension first (XY).
      if (c < d0.col)
        out.add(kPortE, kPhaseApproach);
      else if (c > d1.col)
        out.add(kPortW, kPhaseApproach);
      else if (r < d0.row)
        out.add(kPortS, kPhaseApproach);
      else
        out.add(kPortN, kPhaseApproach);
      return out;
    }
    // Entry point (or a source already inside its own rectangle): deliver,
    // spread along the entry column, and start this row's spread.
    out.deliver = true;
    if (r > d0.row) out.add(kPortN, kPhaseColumn);
    if (r < d1.row) out.add(kPortS, kPhaseColumn);
    if (c > d0.col) out.add(kPortW, kPhaseRow);
    if (c < d1.col) out.add(kPortE, kPhaseRow);
    return out;
  }

  if (p.phase == kPhaseColumn) {
    out.deliver = true;
    if (in_port == kPortS) {  // heading north
      if (r > d0.row) out.add(kPortN, kPhaseColumn);
    } else if (in_port == kPortN) {  // heading south
      if (r < d1.row) out.add(kPortS, kPhaseColumn);
    } else {
      throw SimError("column-phase packet arrived on a row port");
    }
    if (c > d0.col) out.add(kPortW, kPhaseRow);
    if (c < d1.col) out.add(kPortE, kPhaseRow);
    return out;
  }

  if (p.phase == kPhaseRow) {
    out.deliver = true;
    if (in_port == kPortW) {  // heading east
      if (c < d1.col) out.add(kPortE, kPhaseRow);
    } else if (in_port == kPortE) {  // heading west
      if (c > d0.col) out.add(kPortW, kPhaseRow);
    } else {
      throw SimError("row-phase packet arrived on a column port");
    }
    return out;
  }
  throw SimError("bad packet phase");
}

namespace {

constexpr int kOpposite[4] = {kPortS, kPortW, kPortN, kPortE};

Coord neighbor_of(Coord c, int port) {
  switch (port) {
    case kPortN: return Coord{static_cast<uint8_t>(c.row - 1), c.col};
    case kPortS: return Coord{static_cast<uint8_t>(c.row + 1), c.col};
    case kPortE: return Coord{c.row, static_cast<uint8_t>(c.col + 1)};
    case kPortW: return Coord{c.row, static_cast<uint8_t>(c.col - 1)};
    default: throw SimError("no neighbor on local port");
  }
}

}  // namespace

Mesh::Mesh(int rows, int cols, size_t queue_cap)
    : rows_(rows), cols_(cols), queue_cap_(queue_cap) {
  if (rows < 1 || cols < 1 || rows > 15 || cols > 15)
    throw SimError("grid dimensions must be within 1..15");
  routers_.resize(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; r++)
    for (int c = 0; c < cols; c++)
      router(Coord{static_cast<uint8_t>(r), static_cast<uint8_t>(c)}).coord = {
          static_cast<uint8_t>(r), static_cast<uint8_t>(c)};
}

// Injection performs the source router's routing step in the injection
// cycle, so an n-hop unicast under zero contention is delivered after
// exactly n network cycles and a self-addressed packet after zero.
bool Mesh::inject(Coord at, const Packet& packet) {
  Packet p = packet;
  p.sim_src = at;
  const auto dec = route_next_hops(at, p, kPortL, rows_, cols_);
  for (int h = 0; h < dec.hop_count; h++) {
    const int op = dec.hops[h].port;
    auto& nb = router(neighbor_of(at, op));
    const auto& dst = nb.in_q[kOpposite[op]];
    const auto& stg = nb.staged[kOpposite[op]];
    if (dst.size() + stg.size() >= queue_cap_) return false;
  }
  injected_++;
  duplicated_ += static_cast<uint64_t>(dec.hop_count + (dec.deliver ? 1 : 0)) - 1;
  if (dec.deliver) {
    deliveries_.push_back({at, p});
    delivered_++;
  }
  auto& rt = router(at);
  for (int h = 0; h < dec.hop_count; h++) {
    const int op = dec.hops[h].port;
    Packet fwd = p;
    fwd.phase = dec.hops[h].phase;
    router(neighbor_of(at, op)).staged[kOpposite[op]].push_back(fwd);
    rt.forwarded[op]++;
    link_traversals_++;
  }
  return true;
}

void Mesh::step() {
  cycles_++;
  // Cycle boundary: packets staged by last cycle's forwards (or by
  // injection) become routable inputs.
  for (auto& rt : routers_) {
    for (int pt = 0; pt < kNumPorts; pt++) {
      while (!rt.staged[pt].empty()) {
        rt.in_q[pt].push_back(rt.staged[pt].front());
        rt.staged[pt].pop_front();
      }
    }
  }
  // Route stage: every router forwards at most one packet per input port,
  // claiming at most one packet per output link; port priority N,E,S,W,L.
  for (auto& rt : routers_) {
    bool claimed[kNumPorts] = {};
    for (int ip = 0; ip < kNumPorts; ip++) {
      if (rt.in_q[ip].empty()) continue;
      const Packet p = rt.in_q[ip].front();
      const auto dec = route_next_hops(rt.coord, p, ip, rows_, cols_);
      bool ok = true;
      for (int h = 0; h < dec.hop_count; h++) {
        const int op = dec.hops[h].port;
        auto& nb = router(neighbor_of(rt.coord, op));
        const auto& dst = nb.in_q[kOpposite[op]];
        const auto& stg = nb.staged[kOpposite[op]];
        if (claimed[op] || dst.size() + stg.size() >= queue_cap_) {
          ok = false;  // stall: full queues backpressure, never drop
          break;
        }
      }
      if (!ok) continue;
      rt.in_q[ip].pop_front();
      duplicated_ +=
          static_cast<uint64_t>(dec.hop_count + (dec.deliver ? 1 : 0)) - 1;
      if (dec.deliver) {
        deliveries_.push_back({rt.coord, p});
        delivered_++;
      }
      for (int h = 0; h < dec.hop_count; h++) {
        const int op = dec.hops[h].port;
        Packet fwd = p;
        fwd.phase = dec.hops[h].phase;
        router(neighbor_of(rt.coord, op)).staged[kOpposite[op]].push_back(fwd);
        claimed[op] = true;
        rt.forwarded[op]++;
        link_traversals_++;
      }
    }
  }
}

bool Mesh::idle() const { return in_flight() == 0; }

size_t Mesh::in_flight() const {
  size_t n = 0;
  for (const auto& rt : routers_) n += rt.occupancy();
  return n;
}

}  // namespace taibai
