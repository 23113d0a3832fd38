#include "taibai/mapping.hpp"

#include <algorithm>
#include <tuple>

#include "taibai/codegen.hpp"
#include "taibai/neuron_core.hpp"

namespace taibai {

std::vector<std::vector<uint32_t>> fanin_counts(const LoweredNet& net) {
  std::vector<std::vector<uint32_t>> counts(net.pops.size());
  for (size_t p = 0; p < net.pops.size(); p++)
    counts[p].assign(net.pops[p].shape.size(), 0);
  for (const auto& l : net.links) {
    if (l.value_scale != 0 || l.kind == LinkKind::Pool) continue;
    const Shape ss = l.src < 0 ? net.input : net.pops[l.src].shape;
    const Shape ds = net.pops[l.dst].shape;
    switch (l.kind) {
      case LinkKind::Full:
        for (int d = 0; d < ds.size(); d++)
          counts[l.dst][d] += static_cast<uint32_t>(ss.size());
        break;
      case LinkKind::Sparse:
        for (const auto& e : l.edges) counts[l.dst][e.dst]++;
        break;
      case LinkKind::Conv:
        for (int co = 0; co < ds.c; co++)
          for (int y = 0; y < ds.h; y++)
            for (int x = 0; x < ds.w; x++) {
              uint32_t n = 0;
              for (int ky = 0; ky < l.k; ky++)
                for (int kx = 0; kx < l.k; kx++) {
                  const int sy = y * l.stride + ky - l.pad;
                  const int sx = x * l.stride + kx - l.pad;
                  if (sy >= 0 && sy < ss.h && sx >= 0 && sx < ss.w) n++;
                }
              counts[l.dst][(co * ds.h + y) * ds.w + x] += n * ss.c;
            }
        break;
      case LinkKind::Pool:
        break;
    }
  }
  return counts;
}

namespace {

struct PopTraits {
  bool conv_fed = false;
  bool pool_fed = false;
  bool full_fed = false;
  bool sparse_fed = false;
  bool value_fed = false;
  uint32_t axon_space = 0;  // combined weighted axon space (full links)
  uint32_t conv_cin = 0;
};

PopTraits traits_of(const LoweredNet& net, int p) {
  PopTraits t;
  for (const auto& l : net.links) {
    if (l.dst != p) continue;
    if (l.value_scale != 0) {
      t.value_fed = true;
      continue;
    }
    const Shape ss = l.src < 0 ? net.input : net.pops[l.src].shape;
    switch (l.kind) {
      case LinkKind::Full:
        t.full_fed = true;
        t.axon_space += static_cast<uint32_t>(ss.size());
        break;
      case LinkKind::Sparse:
        t.sparse_fed = true;
        t.axon_space += static_cast<uint32_t>(ss.size());
        break;
      case LinkKind::Conv:
        t.conv_fed = true;
        t.conv_cin = static_cast<uint32_t>(ss.c);
        break;
      case LinkKind::Pool:
        t.pool_fed = true;
        break;
    }
  }
  return t;
}

// Estimated data-block words for one logical neuron group.
uint32_t group_words(const LoweredPop& pop, int members, uint32_t fanin,
                     uint32_t axon_space, bool bitmap, bool conv) {
  uint32_t w = static_cast<uint32_t>(members) * kBlockFixed;
  if (!conv) w += fanin;  // per-neuron weight table
  if (bitmap) w += members * ((axon_space + 15) / 16);
  if (pop.learning == LearningRule::STDP) w += fanin;   // pre-spike times
  if (pop.learning == LearningRule::AccumFC) w += fanin;  // spike counts
  return w;
}

}  // namespace

Mapping partition(const LoweredNet& net, const CompileOptions& opt) {
  Mapping m;
  m.pops.resize(net.pops.size());
  const auto fanins = fanin_counts(net);
  int next_nc = 0;

  for (size_t p = 0; p < net.pops.size(); p++) {
    const LoweredPop& pop = net.pops[p];
    const PopTraits t = traits_of(net, static_cast<int>(p));
    PopPlan& plan = m.pops[p];
    const uint32_t fmax =
        fanins[p].empty() ? 0
                          : *std::max_element(fanins[p].begin(), fanins[p].end());

    if (pop.model == NeuronModel::DHLIF) {
      plan.members = pop.dh_branches + 1;
      for (const uint32_t f : fanins[p]) {
        const uint32_t per = (f + pop.dh_branches - 1) / pop.dh_branches;
        if (per > opt.fanin_limit)
          throw SimError("DH-LIF branch fan-in exceeds the limit even split");
      }
    } else {
      const uint32_t acc = (fmax + opt.fanin_limit - 1) / opt.fanin_limit;
      plan.members = acc > 1 ? static_cast<int>(acc) + 1 : 1;
    }
    if (plan.members > 1) {
      if (t.conv_fed && (t.full_fed || t.sparse_fed))
        throw SimError("fan-in expansion over mixed conv+other links");
      if (pop.learning != LearningRule::None)
        throw SimError("learning presets need fan-in within the limit");
      if (!pop.bias.empty())
        throw SimError("fused bias with fan-in expansion is unsupported");
      const int acc = plan.members - 1;
      if (t.conv_fed) {
        plan.chunk = (t.conv_cin + acc - 1) / acc;  // input-channel chunk
      } else if (t.full_fed && !t.sparse_fed &&
                 pop.model != NeuronModel::DHLIF) {
        plan.chunk = (t.axon_space + acc - 1) / acc;  // axon chunk
      } else {
        plan.chunk_by_rank = true;  // per-neuron slot-rank chunks
      }
      if (t.full_fed && pop.model == NeuronModel::DHLIF && !t.sparse_fed)
        plan.chunk = (t.axon_space + acc - 1) / acc;
    }

    const bool bitmap = (t.sparse_fed || t.full_fed) && !opt.sparse_type1 &&
                        !t.conv_fed;
    const int members = plan.members;
    const bool spatial = t.conv_fed || t.pool_fed;

    if (spatial) {
      const int S = pop.shape.h * pop.shape.w;
      const int C = pop.shape.c;
      int cpn, nchunks, poschunk;
      if (S * members <= static_cast<int>(NeuronCore::kMaxNeurons)) {
        cpn = std::min(C, static_cast<int>(NeuronCore::kMaxNeurons) /
                              (S * members));
        nchunks = 1;
        poschunk = S;
      } else {
        cpn = 1;
        nchunks = (S * members + NeuronCore::kMaxNeurons - 1) /
                  NeuronCore::kMaxNeurons;
        poschunk = (S + nchunks - 1) / nchunks;
      }
      for (int c0 = 0; c0 < C; c0 += cpn) {
        const int c1 = std::min(C, c0 + cpn);
        for (int q0 = 0; q0 < S; q0 += poschunk) {
          const int q1 = std::min(S, q0 + poschunk);
          NcAlloc a;
          a.pop = static_cast<int>(p);
          a.nc = next_nc % kNcsPerCc;
          a.cc = next_nc / kNcsPerCc;
          next_nc++;
          a.conv_layout = true;
          a.chan_lo = c0;
          a.chan_hi = c1;
          a.pos_lo = q0;
          a.pos_hi = q1;
          a.cpn = c1 - c0;
          a.b = (q1 - q0) * (c1 - c0);
          a.slot_base = 0;
          plan.allocs.push_back(static_cast<int>(m.allocs.size()));
          m.allocs.push_back(a);
        }
      }
    } else {
      const int n = pop.shape.size();
      const uint32_t gw = group_words(pop, members, fmax, t.axon_space,
                                      bitmap, t.conv_fed);
      const uint32_t reserve = 512;  // shared tables and slack
      int b_cap = static_cast<int>(NeuronCore::kMaxNeurons) / members;
      if (gw > 0)
        b_cap = std::min(
            b_cap, static_cast<int>((opt.nc_data_words - reserve) / gw));
      if (b_cap < 1)
        throw SimError("a single neuron group exceeds core memory");
      for (int lo = 0; lo < n; lo += b_cap) {
        NcAlloc a;
        a.pop = static_cast<int>(p);
        a.nc = next_nc % kNcsPerCc;
        a.cc = next_nc / kNcsPerCc;
        next_nc++;
        a.logical_lo = lo;
        a.b = std::min(b_cap, n - lo);
        a.slot_base = 0;
        plan.allocs.push_back(static_cast<int>(m.allocs.size()));
        m.allocs.push_back(a);
      }
    }
  }
  m.num_ncs = next_nc;
  m.num_ccs = (next_nc + kNcsPerCc - 1) / kNcsPerCc;
  return m;
}

UnitLoc Mapping::locate(const LoweredNet& net, int p, uint32_t id,
                        int mem) const {
  const PopPlan& plan = pops[p];
  const Shape sh = net.pops[p].shape;
  for (const int ai : plan.allocs) {
    const NcAlloc& a = allocs[ai];
    if (a.conv_layout) {
      const int S = sh.h * sh.w;
      const int c = static_cast<int>(id) / S;
      const int q = static_cast<int>(id) % S;
      if (c < a.chan_lo || c >= a.chan_hi || q < a.pos_lo || q >= a.pos_hi)
        continue;
      const int span = a.pos_hi - a.pos_lo;
      return {a.cc, a.nc,
              static_cast<uint16_t>(a.slot_base + mem * span * a.cpn +
                                    (q - a.pos_lo) * a.cpn + (c - a.chan_lo))};
    }
    if (static_cast<int>(id) < a.logical_lo ||
        static_cast<int>(id) >= a.logical_lo + a.b)
      continue;
    return {a.cc, a.nc,
            static_cast<uint16_t>(a.slot_base + mem * a.b +
                                  (static_cast<int>(id) - a.logical_lo))};
  }
  throw SimError("neuron not located in any allocation");
}

int merge_cores(Mapping& m, const LoweredNet& net, const CompileOptions& opt) {
  if (opt.target == CompileOptions::Target::MaxThroughput) return 0;
  // Merge key: populations whose compiled program agrees bit for bit
  // (table addresses are resolved per core after merging).
  std::vector<std::string> pop_key(net.pops.size());
  for (size_t p = 0; p < net.pops.size(); p++)
    pop_key[p] = merge_key(net, opt, static_cast<int>(p));
  const auto key_of = [&](const NcAlloc& a) {
    return std::tuple(pop_key[a.pop], a.conv_layout, m.pops[a.pop].members);
  };
  // Rough per-alloc resource use.
  const auto fanins = fanin_counts(net);
  const auto words_of = [&](const NcAlloc& a) {
    uint64_t w = 0;
    const int members = m.pops[a.pop].members;
    if (a.conv_layout) {
      w += static_cast<uint64_t>(a.b) * members * kBlockFixed;
      // shared banks counted per alloc at codegen; estimate generously
      w += 4096;
    } else {
      for (int i = 0; i < a.b; i++) {
        const uint32_t f = fanins[a.pop][a.logical_lo + i];
        w += members * kBlockFixed + f + (f + 15) / 16 + 8;
        if (net.pops[a.pop].learning != LearningRule::None) w += f;
      }
    }
    return w;
  };

  int merges = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    // Candidate order: fewest units first.
    std::vector<int> order(m.allocs.size());
    for (size_t i = 0; i < order.size(); i++) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      const int ux = m.allocs[x].b * m.pops[m.allocs[x].pop].members;
      const int uy = m.allocs[y].b * m.pops[m.allocs[y].pop].members;
      return ux != uy ? ux < uy : x < y;
    });
    // host_nc -> allocs residing there
    std::vector<std::vector<int>> by_nc(m.num_ncs);
    for (size_t i = 0; i < m.allocs.size(); i++)
      by_nc[m.allocs[i].cc * kNcsPerCc + m.allocs[i].nc].push_back(
          static_cast<int>(i));

    for (const int ai : order) {
      NcAlloc& a = m.allocs[ai];
      const int a_nc = a.cc * kNcsPerCc + a.nc;
      if (by_nc[a_nc].size() != 1) continue;  // already a merge host/guest
      for (const int bi : order) {
        if (bi == ai) continue;
        NcAlloc& b = m.allocs[bi];
        const int b_nc = b.cc * kNcsPerCc + b.nc;
        if (b_nc == a_nc || by_nc[b_nc].size() != 1) continue;
        if (key_of(a) != key_of(b)) continue;
        const int units_a = a.b * m.pops[a.pop].members;
        const int units_b = b.b * m.pops[b.pop].members;
        if (units_a + units_b > static_cast<int>(NeuronCore::kMaxNeurons))
          continue;
        if (words_of(a) + words_of(b) + 512 > opt.nc_data_words) continue;
        // Move b onto a's core.
        b.cc = a.cc;
        b.nc = a.nc;
        b.slot_base = static_cast<uint16_t>(a.slot_base + units_a);
        by_nc[a_nc].push_back(bi);
        by_nc[b_nc].clear();
        merges++;
        changed = true;
        break;
      }
      if (changed) break;
    }
  }
  if (merges == 0) return 0;

  // Compact surviving cores into a dense NC/CC numbering.
  std::vector<std::pair<int, int>> live;  // old nc id, kept order
  std::vector<int> new_id(m.num_ncs, -1);
  for (const auto& a : m.allocs) {
    const int nc = a.cc * kNcsPerCc + a.nc;
    if (new_id[nc] == -1) {
      new_id[nc] = static_cast<int>(live.size());
      live.push_back({nc, 0});
    }
  }
  for (auto& a : m.allocs) {
    const int nid = new_id[a.cc * kNcsPerCc + a.nc];
    a.cc = nid / kNcsPerCc;
    a.nc = nid % kNcsPerCc;
  }
  m.num_ncs = static_cast<int>(live.size());
  m.num_ccs = (m.num_ncs + kNcsPerCc - 1) / kNcsPerCc;
  return merges;
}

}  // namespace taibai
