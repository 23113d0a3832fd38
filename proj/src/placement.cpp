#include "taibai/placement.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace taibai {

namespace {
int manhattan(Coord a, Coord b) {
  return std::abs(static_cast<int>(a.row) - b.row) +
         std::abs(static_cast<int>(a.col) - b.col);
}
}  // namespace

uint64_t placement_objective(const Placement& p, const Traffic& t) {
  uint64_t obj = 0;
  for (int s = 0; s < t.n; s++)
    for (int d = 0; d < t.n; d++) {
      const uint64_t f = t.flow(s, d);
      if (f) obj += f * static_cast<uint64_t>(manhattan(p.at[s], p.at[d]));
    }
  return obj;
}

Placement place_initial(int num_ccs, int rows, int cols) {
  if (num_ccs > rows * cols)
    throw SimError("more logical CCs than grid positions");
  Placement p;
  p.rows = rows;
  p.cols = cols;
  p.at.resize(num_ccs);
  for (int i = 0; i < num_ccs; i++) {
    const int r = i / cols;
    const int c = (r % 2 == 0) ? i % cols : cols - 1 - i % cols;
    p.at[i] = {static_cast<uint8_t>(r), static_cast<uint8_t>(c)};
  }
  return p;
}

namespace {

// Occupancy map: coordinate -> logical cc or -1.
std::vector<int> occupancy(const Placement& p) {
  std::vector<int> occ(static_cast<size_t>(p.rows) * p.cols, -1);
  for (size_t i = 0; i < p.at.size(); i++)
    occ[p.at[i].row * p.cols + p.at[i].col] = static_cast<int>(i);
  return occ;
}

// Objective delta of moving cc `a` to `to` (swapping with any occupant).
int64_t swap_delta(const Placement& p, const Traffic& t, int a, Coord to,
                   int occupant) {
  const Coord from = p.at[a];
  if (to == from) return 0;
  int64_t delta = 0;
  for (int other = 0; other < t.n; other++) {
    if (other == a || other == occupant) continue;
    const uint64_t out = t.flow(a, other), in = t.flow(other, a);
    if (out + in == 0) continue;
    const int64_t d_new = manhattan(to, p.at[other]);
    const int64_t d_old = manhattan(from, p.at[other]);
    delta += static_cast<int64_t>(out + in) * (d_new - d_old);
  }
  if (occupant >= 0) {
    for (int other = 0; other < t.n; other++) {
      if (other == a || other == occupant) continue;
      const uint64_t out = t.flow(occupant, other), in = t.flow(other, occupant);
      if (out + in == 0) continue;
      const int64_t d_new = manhattan(from, p.at[other]);
      const int64_t d_old = manhattan(to, p.at[other]);
      delta += static_cast<int64_t>(out + in) * (d_new - d_old);
    }
    // The a<->occupant distance itself is unchanged by a swap.
  }
  return delta;
}

void apply_move(Placement& p, std::vector<int>& occ, int a, Coord to) {
  const Coord from = p.at[a];
  const int occupant = occ[to.row * p.cols + to.col];
  occ[from.row * p.cols + from.col] = occupant;
  occ[to.row * p.cols + to.col] = a;
  if (occupant >= 0) p.at[occupant] = from;
  p.at[a] = to;
}

}  // namespace

namespace {

// Exhaustive search over every injective placement; feasible only for tiny
// instances (used so greedy provably matches the optimum there).
Placement exhaustive_best(const Placement& initial, const Traffic& t) {
  const int cells = initial.rows * initial.cols;
  std::vector<int> cell_ids(cells);
  for (int i = 0; i < cells; i++) cell_ids[i] = i;
  Placement best = initial;
  uint64_t best_obj = placement_objective(initial, t);
  std::vector<int> pick(t.n);
  std::vector<bool> used(cells, false);
  Placement cur = initial;
  const std::function<void(int)> rec = [&](int cc) {
    if (cc == t.n) {
      const uint64_t obj = placement_objective(cur, t);
      if (obj < best_obj) {
        best_obj = obj;
        best = cur;
      }
      return;
    }
    for (int cell = 0; cell < cells; cell++) {
      if (used[cell]) continue;
      used[cell] = true;
      cur.at[cc] = {static_cast<uint8_t>(cell / cur.cols),
                    static_cast<uint8_t>(cell % cur.cols)};
      rec(cc + 1);
      used[cell] = false;
    }
  };
  rec(0);
  return best;
}

}  // namespace

Placement optimize_greedy(const Placement& initial, const Traffic& t,
                          int max_rounds) {
  // Tiny instances are solved exactly.
  uint64_t perms = 1;
  const int cells = initial.rows * initial.cols;
  for (int i = 0; i < t.n; i++) perms *= static_cast<uint64_t>(cells - i);
  if (t.n <= 6 && perms <= 20000) return exhaustive_best(initial, t);

  Placement p = initial;
  auto occ = occupancy(p);
  for (int round = 0; round < max_rounds; round++) {
    int64_t best = 0;
    int best_cc = -1;
    Coord best_to{};
    for (int a = 0; a < t.n; a++) {
      for (int r = 0; r < p.rows; r++)
        for (int c = 0; c < p.cols; c++) {
          const Coord to{static_cast<uint8_t>(r), static_cast<uint8_t>(c)};
          const int occupant = occ[r * p.cols + c];
          if (occupant == a) continue;
          const int64_t d = swap_delta(p, t, a, to, occupant);
          if (d < best) {
            best = d;
            best_cc = a;
            best_to = to;
          }
        }
    }
    if (best_cc < 0) break;  // local optimum
    apply_move(p, occ, best_cc, best_to);
  }
  return p;
}

Placement optimize_annealing(const Placement& initial, const Traffic& t,
                             uint64_t seed, int epochs, int swaps_per_epoch,
                             double cooling) {
  std::mt19937_64 rng(seed);
  Placement cur = initial;
  auto occ = occupancy(cur);
  uint64_t cur_obj = placement_objective(cur, t);
  Placement best = cur;
  uint64_t best_obj = cur_obj;
  if (t.n == 0) return best;

  // Initial temperature: accept about half of typical uphill moves.
  double sum_up = 0;
  int n_up = 0;
  for (int i = 0; i < 128; i++) {
    const int a = static_cast<int>(rng() % t.n);
    const Coord to{static_cast<uint8_t>(rng() % cur.rows),
                   static_cast<uint8_t>(rng() % cur.cols)};
    const int occupant = occ[to.row * cur.cols + to.col];
    if (occupant == a) continue;
    const int64_t d = swap_delta(cur, t, a, to, occupant);
    if (d > 0) {
      sum_up += static_cast<double>(d);
      n_up++;
    }
  }
  double temp = n_up ? (sum_up / n_up) / std::log(2.0) : 1.0;
  if (temp <= 0) temp = 1.0;

  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int e = 0; e < epochs; e++) {
    for (int s = 0; s < swaps_per_epoch; s++) {
      const int a = static_cast<int>(rng() % t.n);
      const Coord to{static_cast<uint8_t>(rng() % cur.rows),
                     static_cast<uint8_t>(rng() % cur.cols)};
      const int occupant = occ[to.row * cur.cols + to.col];
      if (occupant == a) continue;
      const int64_t d = swap_delta(cur, t, a, to, occupant);
      if (d <= 0 || u(rng) < std::exp(-static_cast<double>(d) / temp)) {
        apply_move(cur, occ, a, to);
        cur_obj = static_cast<uint64_t>(static_cast<int64_t>(cur_obj) + d);
        if (cur_obj < best_obj) {
          best_obj = cur_obj;
          best = cur;
        }
      }
    }
    temp *= cooling;
  }
  return best_obj <= placement_objective(initial, t) ? best : initial;
}

}  // namespace taibai
