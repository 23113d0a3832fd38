#include "taibai/codegen.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "taibai/config_words.hpp"
#include "taibai/core_image.hpp"

namespace taibai {

namespace {

struct Slot {
  int link;
  uint32_t src;
  uint16_t w;
};

struct PopInfo {
  bool full_fed = false, sparse_fed = false, conv_fed = false,
       pool_fed = false, value_fed = false;
  int conv_link = -1;
  uint32_t axon_space = 0;
  std::map<int, uint32_t> axon_off;       // weighted link -> combined offset
  std::vector<std::vector<Slot>> slots;   // per logical neuron (non-conv)
  bool dense() const { return full_fed && !sparse_fed; }
};

PopInfo pop_info(const LoweredNet& net, int p) {
  PopInfo info;
  const int n = net.pops[p].shape.size();
  info.slots.resize(n);
  for (size_t li = 0; li < net.links.size(); li++) {
    const LoweredLink& l = net.links[li];
    if (l.dst != p) continue;
    if (l.value_scale != 0) {
      info.value_fed = true;
      continue;
    }
    const Shape ss = l.src < 0 ? net.input : net.pops[l.src].shape;
    switch (l.kind) {
      case LinkKind::Full: {
        info.full_fed = true;
        info.axon_off[static_cast<int>(li)] = info.axon_space;
        for (int d = 0; d < n; d++)
          for (int s = 0; s < ss.size(); s++)
            info.slots[d].push_back(
                {static_cast<int>(li), static_cast<uint32_t>(s),
                 l.weights[static_cast<size_t>(d) * ss.size() + s]});
        info.axon_space += static_cast<uint32_t>(ss.size());
        break;
      }
      case LinkKind::Sparse: {
        info.sparse_fed = true;
        info.axon_off[static_cast<int>(li)] = info.axon_space;
        std::vector<Edge> edges = l.edges;
        std::sort(edges.begin(), edges.end(),
                  [](const Edge& a, const Edge& b) {
                    return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
                  });
        for (const auto& e : edges)
          info.slots[e.dst].push_back({static_cast<int>(li), e.src, e.weight});
        info.axon_space += static_cast<uint32_t>(ss.size());
        break;
      }
      case LinkKind::Conv:
        info.conv_fed = true;
        info.conv_link = static_cast<int>(li);
        break;
      case LinkKind::Pool:
        info.pool_fed = true;
        break;
    }
  }
  if (info.conv_fed && (info.full_fed || info.sparse_fed))
    throw SimError("conv populations accept only conv and value links");
  if (info.pool_fed && (info.full_fed || info.sparse_fed || info.conv_fed))
    throw SimError("pool populations accept only the pool and value links");
  return info;
}

// Allocates (tag, index) pairs so that every target CC's directory entry is
// free at the index and no CC inside the multicast rectangle can falsely
// match the tag.
class TagIndexAllocator {
 public:
  explicit TagIndexAllocator(int num_ccs) : cc_(num_ccs) {}

  struct Result {
    uint8_t tag;
    uint16_t index;
  };

  Result allocate(const std::vector<int>& targets,
                  const std::vector<int>& rect) {
    for (uint32_t attempt = 0; attempt < 251; attempt++) {
      const uint8_t tag = static_cast<uint8_t>((counter_ + attempt) % 251);
      uint16_t index = 0;
      for (const int cc : targets)
        index = std::max(index, cc_[cc].hint);
      for (; index < cfg::kMaxFanInDes; index++) {
        bool ok = true;
        for (const int cc : targets) {
          const auto& st = cc_[cc];
          if (index < st.de_tag.size() && st.de_tag[index] >= 0) {
            ok = false;
            break;
          }
          const auto it = st.pass.find(index);
          if (it != st.pass.end() && it->second.count(tag)) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        for (const int cc : rect) {
          if (std::find(targets.begin(), targets.end(), cc) != targets.end())
            continue;
          const auto& st = cc_[cc];
          if (index < st.de_tag.size() && st.de_tag[index] == tag) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        // Commit.
        for (const int cc : targets) {
          auto& st = cc_[cc];
          if (st.de_tag.size() <= index) st.de_tag.resize(index + 1, -1);
          st.de_tag[index] = tag;
          while (st.hint < st.de_tag.size() && st.de_tag[st.hint] >= 0)
            st.hint++;
        }
        for (const int cc : rect) {
          if (std::find(targets.begin(), targets.end(), cc) != targets.end())
            continue;
          cc_[cc].pass[index].insert(tag);
        }
        counter_++;
        return {tag, index};
      }
    }
    throw SimError("fan-in directory table exhausted");
  }

 private:
  struct CcState {
    std::vector<int16_t> de_tag;  // -1 = free
    std::map<uint16_t, std::set<uint8_t>> pass;
    uint16_t hint = 0;
  };
  std::vector<CcState> cc_;
  uint32_t counter_ = 0;
};

struct UnitFanout {
  std::vector<FanOutIE> fwd, dly;
  uint16_t delay = 0;
  uint16_t global_axon = 0;
};

struct Build {
  const LoweredNet& net;
  const Mapping& map;
  const Placement& place;
  const CompileOptions& opt;
  std::vector<PopInfo> pops;
  TagIndexAllocator alloc;
  std::vector<FanInTable> fan_in;  // per logical cc
  // (cc << 16) | (nc*256+local) -> fan-out assembly
  std::map<uint32_t, UnitFanout> fanout;
  std::vector<HostFanout> host_inputs;
  StorageCounts storage;

  Build(const LoweredNet& n, const Mapping& m, const Placement& pl,
        const CompileOptions& o)
      : net(n), map(m), place(pl), opt(o), alloc(m.num_ccs) {
    fan_in.resize(m.num_ccs);
    for (int p = 0; p < static_cast<int>(n.pops.size()); p++)
      pops.push_back(pop_info(n, p));
  }

  std::pair<uint8_t, uint8_t> bbox_rows(const std::vector<int>& ccs) const {
    uint8_t lo = 15, hi = 0;
    for (const int cc : ccs) {
      lo = std::min(lo, place.at[cc].row);
      hi = std::max(hi, place.at[cc].row);
    }
    return {lo, hi};
  }

  // Bounding rectangle of the target CCs plus every CC inside it.
  struct Rect {
    Coord d0, d1;
    std::vector<int> inside;  // logical ccs placed inside the box
  };
  Rect rect_of(const std::vector<int>& targets) const {
    Rect r;
    r.d0 = {15, 15};
    r.d1 = {0, 0};
    for (const int cc : targets) {
      const Coord c = place.at[cc];
      r.d0.row = std::min(r.d0.row, c.row);
      r.d0.col = std::min(r.d0.col, c.col);
      r.d1.row = std::max(r.d1.row, c.row);
      r.d1.col = std::max(r.d1.col, c.col);
    }
    for (int cc = 0; cc < map.num_ccs; cc++) {
      const Coord c = place.at[cc];
      if (c.row >= r.d0.row && c.row <= r.d1.row && c.col >= r.d0.col &&
          c.col <= r.d1.col)
        r.inside.push_back(cc);
    }
    return r;
  }

  FanOutIE make_ie(const Rect& r, uint8_t tag, uint16_t index,
                   uint16_t axon) const {
    FanOutIE ie;
    ie.mode = r.d0 == r.d1 ? kRouteUnicast : kRouteMulticast;
    ie.d0 = r.d0;
    ie.d1 = r.d1;
    ie.tag = tag;
    ie.index = index;
    ie.axon = axon;
    return ie;
  }

  void add_de(int cc, uint16_t index, uint8_t tag, uint8_t type, bool value,
              const std::vector<FanInIE>& ies) {
    FanInTable& t = fan_in[cc];
    if (t.dt.size() <= index) t.dt.resize(index + 1);
    FanInDE& de = t.dt[index];
    de.occupied = true;
    de.tag = tag;
    de.ie_type = type;
    de.value_carrying = value;
    de.it_offset = static_cast<uint16_t>(t.it.size());
    de.it_count = static_cast<uint16_t>(ies.size());
    if (t.it.size() + ies.size() > cfg::kMaxFanInIes)
      throw SimError("fan-in information table exhausted");
    t.it.insert(t.it.end(), ies.begin(), ies.end());
    storage.fanin_des++;
    storage.fanin_ies += ies.size();
    storage.fanin_ies_by_type[type] += ies.size();
    static constexpr int kFields[4] = {1, 2, 4, 4};
    storage.fanin_ie_bits += ies.size() * kFields[type] * 16;
  }

  // Registers one forward/delayed IE on a source unit (or host input).
  void add_src_ie(int src_pop, uint32_t s, const FanOutIE& ie, int delay) {
    if (src_pop < 0) {
      if (host_inputs.size() <= s) host_inputs.resize(s + 1);
      host_inputs[s].ies.push_back(ie);
      return;
    }
    const int mem = map.pops[src_pop].members - 1;
    const UnitLoc loc = map.locate(net, src_pop, s, mem < 0 ? 0 : mem);
    const uint32_t key = (static_cast<uint32_t>(loc.cc) << 16) |
                         (loc.nc * NeuronCore::kMaxNeurons + loc.local);
    UnitFanout& uf = fanout[key];
    uf.global_axon = static_cast<uint16_t>(s);
    if (delay > 0) {
      if (uf.delay && uf.delay != delay)
        throw SimError("multiple distinct skip delays from one neuron");
      uf.delay = static_cast<uint16_t>(delay);
      uf.dly.push_back(ie);
    } else {
      uf.fwd.push_back(ie);
    }
  }
};

// ---- link encoders ----

void encode_full(Build& b, int li) {
  const LoweredLink& l = b.net.links[li];
  const int p = l.dst;
  const PopInfo& info = b.pops[p];
  const PopPlan& plan = b.map.pops[p];
  const uint32_t off = info.axon_off.at(li);
  const Shape ss = l.src < 0 ? b.net.input : b.net.pops[l.src].shape;
  const int acc = b.map.accumulators(p);
  const uint32_t chunk = plan.members > 1 ? plan.chunk : info.axon_space;

  // Destination allocs grouped by CC.
  std::map<int, std::vector<const NcAlloc*>> by_cc;
  for (const int ai : plan.allocs)
    by_cc[b.map.allocs[ai].cc].push_back(&b.map.allocs[ai]);
  std::vector<int> targets;
  for (const auto& [cc, _] : by_cc) targets.push_back(cc);
  const Build::Rect rect = b.rect_of(targets);

  std::vector<std::pair<uint8_t, uint16_t>> chunk_alloc(acc);
  for (int m = 0; m < acc; m++) {
    const auto a = b.alloc.allocate(targets, rect.inside);
    chunk_alloc[m] = {a.tag, a.index};
    for (const auto& [cc, allocs] : by_cc) {
      // Group same-(start,count) cores under one mask.
      std::map<std::pair<uint16_t, uint16_t>, uint8_t> groups;
      for (const NcAlloc* na : allocs) {
        const uint16_t start =
            static_cast<uint16_t>(na->slot_base + m * na->b);
        groups[{start, static_cast<uint16_t>(na->b)}] |=
            static_cast<uint8_t>(1u << na->nc);
      }
      std::vector<FanInIE> ies;
      for (const auto& [sc, mask] : groups) {
        FanInIE ie;
        ie.mask = mask;
        ie.neuron = sc.first;
        ie.aux = 1;  // margin
        ie.count = sc.second;
        ies.push_back(ie);
      }
      b.add_de(cc, a.index, a.tag, 2, false, ies);
    }
  }
  // Source fan-out: member chunk and (for dense tables) adjusted key.
  for (int s = 0; s < ss.size(); s++) {
    const uint32_t a = off + static_cast<uint32_t>(s);
    const int m = std::min<int>(static_cast<int>(a / chunk), acc - 1);
    const uint16_t axon = static_cast<uint16_t>(
        info.dense() ? a - static_cast<uint32_t>(m) * chunk : a);
    b.add_src_ie(l.src, static_cast<uint32_t>(s),
                 b.make_ie(rect, chunk_alloc[m].first, chunk_alloc[m].second,
                           axon),
                 l.delay);
  }
}

void encode_sparse(Build& b, int li) {
  const LoweredLink& l = b.net.links[li];
  const int p = l.dst;
  const PopInfo& info = b.pops[p];
  const PopPlan& plan = b.map.pops[p];
  const bool value = l.value_scale != 0;
  const uint32_t off = value ? 0 : info.axon_off.at(li);
  const int acc = b.map.accumulators(p);
  const int soma_mem = plan.members - 1;

  // Per-destination slot ranks for member selection and type-1 slots.
  const auto rank_of = [&](uint32_t d, uint32_t s) -> uint32_t {
    const auto& sl = info.slots[d];
    for (uint32_t r = 0; r < sl.size(); r++)
      if (sl[r].link == li && sl[r].src == s) return r;
    throw SimError("edge not found in slot list");
  };

  // Bucket edges by source.
  std::map<uint32_t, std::vector<const Edge*>> by_src;
  for (const auto& e : l.edges) by_src[e.src].push_back(&e);

  for (const auto& [s, edges] : by_src) {
    // Resolve each edge's target unit.
    struct Tgt {
      UnitLoc loc;
      uint32_t rank, chunk_rank;
    };
    std::map<int, std::vector<Tgt>> by_cc;
    for (const Edge* e : edges) {
      int mem = 0;
      uint32_t rank = 0, chunk_rank = 0;
      if (value) {
        mem = soma_mem < 0 ? 0 : soma_mem;
      } else {
        rank = rank_of(e->dst, s);
        if (plan.members > 1) {
          const uint32_t f =
              static_cast<uint32_t>(info.slots[e->dst].size());
          const uint32_t cd = plan.chunk_by_rank
                                  ? (f + acc - 1) / acc
                                  : plan.chunk;
          mem = static_cast<int>(std::min<uint32_t>(rank / cd, acc - 1));
          chunk_rank = rank - mem * cd;
        } else {
          chunk_rank = rank;
        }
      }
      const UnitLoc loc = b.map.locate(b.net, p, e->dst, mem);
      by_cc[loc.cc].push_back({loc, rank, chunk_rank});
    }
    std::vector<int> targets;
    for (const auto& [cc, _] : by_cc) targets.push_back(cc);
    const Build::Rect rect = b.rect_of(targets);
    const auto a = b.alloc.allocate(targets, rect.inside);
    const uint8_t type = (!value && b.opt.sparse_type1) ? 1 : 0;
    for (const auto& [cc, tgts] : by_cc) {
      std::vector<FanInIE> ies;
      for (const auto& t : tgts) {
        FanInIE ie;
        ie.nc = static_cast<uint8_t>(t.loc.nc);
        ie.neuron = t.loc.local;
        if (type == 1) ie.aux = static_cast<uint16_t>(t.chunk_rank);
        ies.push_back(ie);
      }
      b.add_de(cc, a.index, a.tag, type, value, ies);
    }
    const uint16_t axon =
        value ? l.value_scale : static_cast<uint16_t>(off + s);
    b.add_src_ie(l.src, s, b.make_ie(rect, a.tag, a.index, axon), l.delay);
  }
}

void encode_pool(Build& b, int li) {
  const LoweredLink& l = b.net.links[li];
  const int p = l.dst;
  const Shape ss = l.src < 0 ? b.net.input : b.net.pops[l.src].shape;
  const Shape ds = b.net.pops[p].shape;
  // One DE per destination neuron; every source in the window points at it.
  for (int c = 0; c < ds.c; c++)
    for (int y = 0; y < ds.h; y++)
      for (int x = 0; x < ds.w; x++) {
        const uint32_t d = static_cast<uint32_t>((c * ds.h + y) * ds.w + x);
        const UnitLoc loc = b.map.locate(b.net, p, d, 0);
        const std::vector<int> targets{loc.cc};
        const Build::Rect rect = b.rect_of(targets);
        const auto a = b.alloc.allocate(targets, rect.inside);
        FanInIE ie;
        ie.nc = static_cast<uint8_t>(loc.nc);
        ie.neuron = loc.local;
        b.add_de(loc.cc, a.index, a.tag, 0, false, {ie});
        for (int wy = 0; wy < l.window; wy++)
          for (int wx = 0; wx < l.window; wx++) {
            const uint32_t s = static_cast<uint32_t>(
                (c * ss.h + y * l.window + wy) * ss.w + x * l.window + wx);
            b.add_src_ie(l.src, s, b.make_ie(rect, a.tag, a.index, 0),
                         l.delay);
          }
      }
}

void encode_conv(Build& b, int li) {
  const LoweredLink& l = b.net.links[li];
  const int p = l.dst;
  const PopPlan& plan = b.map.pops[p];
  const Shape ss = l.src < 0 ? b.net.input : b.net.pops[l.src].shape;
  const Shape ds = b.net.pops[p].shape;
  const int acc = b.map.accumulators(p);
  const uint32_t cpc = plan.members > 1 ? plan.chunk
                                        : static_cast<uint32_t>(ss.c);
  const int S_src = ss.h * ss.w;

  std::vector<const NcAlloc*> allocs;
  for (const int ai : plan.allocs) allocs.push_back(&b.map.allocs[ai]);

  for (int qs = 0; qs < S_src; qs++) {
    const int sy = qs / ss.w, sx = qs % ss.w;
    // Destination positions touched by a spike at (sy, sx) and the filter
    // offset each one reads.
    std::vector<std::pair<int, uint16_t>> pairs;  // (q_dst, local axon)
    for (int ky = 0; ky < l.k; ky++)
      for (int kx = 0; kx < l.k; kx++) {
        const int ty = sy + l.pad - ky;
        const int tx = sx + l.pad - kx;
        if (ty < 0 || tx < 0 || ty % l.stride || tx % l.stride) continue;
        const int y = ty / l.stride, x = tx / l.stride;
        if (y >= ds.h || x >= ds.w) continue;
        pairs.push_back({y * ds.w + x, static_cast<uint16_t>(ky * l.k + kx)});
      }
    if (pairs.empty()) continue;

    // CCs hosting any touched position (any channel).
    std::set<int> target_set;
    for (const auto& [qd, lax] : pairs)
      for (const NcAlloc* na : allocs)
        if (qd >= na->pos_lo && qd < na->pos_hi) target_set.insert(na->cc);
    const std::vector<int> targets(target_set.begin(), target_set.end());
    const Build::Rect rect = b.rect_of(targets);

    std::vector<std::pair<uint8_t, uint16_t>> chunk_alloc(acc);
    for (int m = 0; m < acc; m++) {
      const auto a = b.alloc.allocate(targets, rect.inside);
      chunk_alloc[m] = {a.tag, a.index};
      for (const int cc : targets) {
        std::vector<FanInIE> ies;
        for (const auto& [qd, lax] : pairs) {
          // Group cores hosting this position by identical local layout.
          std::map<std::pair<uint16_t, uint16_t>, uint8_t> groups;
          for (const NcAlloc* na : allocs) {
            if (na->cc != cc || qd < na->pos_lo || qd >= na->pos_hi) continue;
            const int span = na->pos_hi - na->pos_lo;
            const uint16_t neuron = static_cast<uint16_t>(
                na->slot_base + m * span * na->cpn +
                (qd - na->pos_lo) * na->cpn);
            groups[{neuron, static_cast<uint16_t>(na->cpn)}] |=
                static_cast<uint8_t>(1u << na->nc);
          }
          for (const auto& [nk, mask] : groups) {
            FanInIE ie;
            ie.mask = mask;
            ie.neuron = nk.first;
            ie.aux = lax;
            ie.count = nk.second;
            ies.push_back(ie);
          }
        }
        b.add_de(cc, a.index, a.tag, 3, false, ies);
      }
    }
    // Source fan-out per channel of this position.
    for (int g = 0; g < ss.c; g++) {
      const int m = std::min<int>(static_cast<int>(g / cpc), acc - 1);
      const uint32_t s = static_cast<uint32_t>(g * S_src + qs);
      b.add_src_ie(l.src, s,
                   b.make_ie(rect, chunk_alloc[m].first,
                             chunk_alloc[m].second,
                             static_cast<uint16_t>(g - m * cpc)),
                   l.delay);
    }
  }
}

}  // namespace

PresetOptions preset_options_for_pop(const LoweredNet& net,
                                     const CompileOptions& opt, int p) {
  const PopInfo info = pop_info(net, p);
  const LoweredPop& pop = net.pops[p];
  const PopPlan* plan = nullptr;  // members derived below without a mapping
  (void)plan;
  PresetOptions o;
  // Integ side.
  if (info.conv_fed) {
    const LoweredLink& l = net.links[info.conv_link];
    o.integ = IntegKind::Conv;
    o.k2 = static_cast<uint16_t>(l.k * l.k);
  } else if (info.pool_fed) {
    o.integ = IntegKind::Pool;
  } else {
    o.integ = IntegKind::Weighted;
  }
  // Members are a mapping property; recompute the need for value handling
  // from the model and links (accumulator forwards arrive as values).
  const auto fans = fanin_counts(net);
  const uint32_t fmax =
      fans[p].empty() ? 0 : *std::max_element(fans[p].begin(), fans[p].end());
  const bool expanded = pop.model == NeuronModel::DHLIF ||
                        fmax > opt.fanin_limit;
  o.accept_values = info.value_fed || expanded;
  // Fire side.
  if (expanded) {
    o.fire = FireKind::MixedBranchSoma;
  } else {
    switch (pop.model) {
      case NeuronModel::LIF:
        o.fire = pop.bias.empty() ? FireKind::Lif : FireKind::LifBias;
        break;
      case NeuronModel::ALIF:
        o.fire = FireKind::Alif;
        break;
      case NeuronModel::Integrator:
        o.fire = FireKind::Integrator;
        break;
      case NeuronModel::DHLIF:
        o.fire = FireKind::MixedBranchSoma;
        break;
    }
  }
  // Delayed-spike marking.
  for (const auto& l : net.links)
    if (l.src == p && l.delay > 0) o.send_type = kSendDelayed;
  if (pop.learning == LearningRule::STDP) {
    o.stdp = true;
    o.stdp_wmin = pop.stdp.w_min;
    o.stdp_wmax = pop.stdp.w_max;
  }
  if (pop.learning == LearningRule::AccumFC) {
    o.accum_fc = true;
    o.accum_neg_eta = fp16::neg(pop.eta);
  }
  return o;
}

std::string merge_key(const LoweredNet& net, const CompileOptions& opt,
                      int p) {
  const PresetOptions o = preset_options_for_pop(net, opt, p);
  const LoweredPop& pop = net.pops[p];
  std::ostringstream os;
  os << static_cast<int>(o.integ) << ':' << static_cast<int>(o.fire) << ':'
     << o.accept_values << ':' << o.k2 << ':' << o.send_type << ':' << o.stdp
     << ':' << o.accum_fc << ':' << o.stdp_wmin << ':' << o.stdp_wmax << ':'
     << o.accum_neg_eta << ':' << pop.stdp.a_plus << ':' << pop.stdp.a_minus
     << ':' << pop.stdp.tau_plus << ':' << pop.stdp.tau_minus << ':'
     << pop.eta;
  return os.str();
}

std::vector<std::vector<FanOutIE>> expand_fanout(
    const std::vector<FanOutIE>& ies, size_t capacity) {
  if (capacity == 0) throw SimError("fan-out capacity must be positive");
  std::vector<std::vector<FanOutIE>> out;
  if (ies.size() <= capacity) {
    out.push_back(ies);
    return out;
  }
  const size_t copies = (ies.size() + capacity - 1) / capacity;
  const size_t per = (ies.size() + copies - 1) / copies;
  for (size_t i = 0; i < ies.size(); i += per)
    out.emplace_back(ies.begin() + i,
                     ies.begin() + std::min(ies.size(), i + per));
  return out;
}

Artifact codegen(const LoweredNet& net, const Mapping& map,
                 const Placement& place, const CompileOptions& opt,
                 StorageCounts* storage_out) {
  Build b(net, map, place, opt);

  // Encode every link.
  for (size_t li = 0; li < net.links.size(); li++) {
    const LoweredLink& l = net.links[li];
    if (l.value_scale != 0) {
      encode_sparse(b, static_cast<int>(li));
      continue;
    }
    switch (l.kind) {
      case LinkKind::Full: encode_full(b, static_cast<int>(li)); break;
      case LinkKind::Sparse: encode_sparse(b, static_cast<int>(li)); break;
      case LinkKind::Conv: encode_conv(b, static_cast<int>(li)); break;
      case LinkKind::Pool: encode_pool(b, static_cast<int>(li)); break;
    }
  }
  // Output population emits to the host.
  {
    const int p = net.output_pop();
    const int n = net.pops[p].shape.size();
    if (n > 4095) throw SimError("output layer too wide for host indices");
    for (int d = 0; d < n; d++) {
      FanOutIE ie;
      ie.mode = kRouteUnicast;
      ie.d0 = ie.d1 = kHostCoord;
      ie.index = static_cast<uint16_t>(d);
      ie.axon = static_cast<uint16_t>(d);
      b.add_src_ie(p, static_cast<uint32_t>(d), ie, 0);
    }
  }

  Artifact art;
  art.rows = static_cast<uint16_t>(opt.rows);
  art.cols = static_cast<uint16_t>(opt.cols);
  art.num_ccs = static_cast<uint16_t>(map.num_ccs);
  art.timesteps = static_cast<uint32_t>(net.timesteps);
  art.placement.assign(place.at.begin(), place.at.begin() + map.num_ccs);
  art.host_inputs = b.host_inputs;

  // Assemble fan-out tables per CC.
  std::vector<FanOutTable> fan_out(map.num_ccs);
  for (const auto& [key, uf] : b.fanout) {
    const int cc = static_cast<int>(key >> 16);
    const uint16_t id = static_cast<uint16_t>(key & 0xFFFF);
    FanOutTable& t = fan_out[cc];
    if (t.dt.size() <= id) t.dt.resize(id + 1);
    FanOutDE& de = t.dt[id];
    if (uf.fwd.size() + uf.dly.size() > opt.fanout_de_capacity)
      throw SimError(
          "fan-out IE count exceeds the per-entry capacity; apply fan-out "
          "expansion");
    de.global_axon = uf.global_axon;
    de.fwd_offset = static_cast<uint16_t>(t.it.size());
    de.fwd_count = static_cast<uint16_t>(uf.fwd.size());
    t.it.insert(t.it.end(), uf.fwd.begin(), uf.fwd.end());
    de.dly_offset = static_cast<uint16_t>(t.it.size());
    de.dly_count = static_cast<uint16_t>(uf.dly.size());
    de.delay = uf.delay;
    t.it.insert(t.it.end(), uf.dly.begin(), uf.dly.end());
    b.storage.fanout_des++;
    b.storage.fanout_ies += uf.fwd.size() + uf.dly.size();
    if (t.it.size() > cfg::kMaxFanOutIes)
      throw SimError("fan-out information table exhausted");
  }

  // Build per-core images and the config stream.
  art.pops.resize(net.pops.size());
  for (size_t p = 0; p < net.pops.size(); p++) {
    art.pops[p].shape = net.pops[p].shape;
    art.pops[p].model = static_cast<uint8_t>(net.pops[p].model);
    art.pops[p].learning = static_cast<uint8_t>(net.pops[p].learning);
    art.pops[p].somas.resize(net.pops[p].shape.size());
  }

  // Allocs per physical core.
  std::map<std::pair<int, int>, std::vector<const NcAlloc*>> by_core;
  for (const auto& a : map.allocs) by_core[{a.cc, a.nc}].push_back(&a);

  cfg::Words words;
  uint64_t worst_cc_cycles = 0;
  std::vector<uint64_t> cc_cycles(map.num_ccs, 0);
  const auto fans = fanin_counts(net);

  for (auto& [core, allocs] : by_core) {
    const auto& [cc, nc] = core;
    std::sort(allocs.begin(), allocs.end(),
              [](const NcAlloc* a, const NcAlloc* g) {
                return a->slot_base < g->slot_base;
              });
    PresetOptions popt = preset_options_for_pop(net, opt, allocs[0]->pop);
    for (const NcAlloc* a : allocs)
      if (!(preset_options_for_pop(net, opt, a->pop) == popt))
        throw SimError("merged cores must share one program");

    std::vector<uint16_t> data(opt.nc_data_words, 0);
    uint32_t cursor = 0;

    // Shared STDP tables.
    if (popt.stdp) {
      const StdpParams& sp = net.pops[allocs[0]->pop].stdp;
      const auto dep = stdp_table(sp.a_minus, sp.tau_minus);
      const auto pot = stdp_table(sp.a_plus, sp.tau_plus);
      popt.stdp_dep_base = static_cast<uint16_t>(cursor);
      for (const uint16_t v : dep) data[cursor++] = v;
      popt.stdp_pot_base = static_cast<uint16_t>(cursor);
      for (const uint16_t v : pot) data[cursor++] = v;
    }

    // Shared convolution filter banks: bank per (alloc, c_out, member).
    std::map<std::tuple<const NcAlloc*, int, int>, uint16_t> bank_at;
    for (const NcAlloc* a : allocs) {
      if (!a->conv_layout) continue;
      const PopInfo& info = b.pops[a->pop];
      if (!info.conv_fed) continue;  // pool-fed spatial pop: no banks
      const LoweredLink& l = net.links[info.conv_link];
      const Shape ss = l.src < 0 ? net.input : net.pops[l.src].shape;
      const int acc = map.accumulators(a->pop);
      const uint32_t cpc = map.pops[a->pop].members > 1
                               ? map.pops[a->pop].chunk
                               : static_cast<uint32_t>(ss.c);
      for (int c = a->chan_lo; c < a->chan_hi; c++) {
        for (int m = 0; m < acc; m++) {
          const uint32_t ci0 = m * cpc;
          const uint32_t ci1 =
              std::min<uint32_t>(ci0 + cpc, static_cast<uint32_t>(ss.c));
          bank_at[{a, c, m}] = static_cast<uint16_t>(cursor);
          for (uint32_t ci = ci0; ci < ci1; ci++)
            for (int ky = 0; ky < l.k; ky++)
              for (int kx = 0; kx < l.k; kx++) {
                if (cursor >= data.size())
                  throw SimError("conv banks exceed core memory");
                data[cursor++] =
                    l.weights[((static_cast<size_t>(c) * ss.c + ci) * l.k +
                               ky) *
                                  l.k +
                              kx];
              }
        }
      }
    }

    // Neuron blocks in local-id order.
    uint16_t total_units = 0;
    for (const NcAlloc* a : allocs)
      total_units = std::max<uint16_t>(
          total_units, static_cast<uint16_t>(
                           a->slot_base + a->b * map.pops[a->pop].members));
    std::vector<NeuronBlock> blocks(total_units);
    std::vector<std::pair<int, uint32_t>> soma_slots;  // (pop, logical)
    for (const NcAlloc* a : allocs) {
      const LoweredPop& pop = net.pops[a->pop];
      const PopInfo& info = b.pops[a->pop];
      const PopPlan& plan = map.pops[a->pop];
      const int members = plan.members;
      const int acc = map.accumulators(a->pop);
      const int bsz = a->b;
      const int span = a->conv_layout ? a->pos_hi - a->pos_lo : 0;
      for (int m = 0; m < members; m++) {
        for (int i = 0; i < bsz; i++) {
          uint16_t local;
          uint32_t logical;
          if (a->conv_layout) {
            const int q = a->pos_lo + i / a->cpn;
            const int c = a->chan_lo + i % a->cpn;
            local = static_cast<uint16_t>(a->slot_base + m * span * a->cpn +
                                          (q - a->pos_lo) * a->cpn +
                                          (c - a->chan_lo));
            logical = static_cast<uint32_t>(c * (net.pops[a->pop].shape.h *
                                                 net.pops[a->pop].shape.w) +
                                            q);
          } else {
            local = static_cast<uint16_t>(a->slot_base + m * bsz + i);
            logical = static_cast<uint32_t>(a->logical_lo + i);
          }
          NeuronBlock& blk = blocks[local];
          const bool soma = members == 1 || m == members - 1;
          const uint16_t tau =
              pop.tau_per.empty() ? pop.tau : pop.tau_per[logical];
          const uint16_t vth =
              pop.vth_per.empty() ? pop.vth : pop.vth_per[logical];
          if (soma) {
            blk.vars = lif_vars(0, tau, 0, vth);
            blk.vars[kVarCls] = kClsSoma;
            if (!pop.bias.empty()) blk.vars[kVarBias] = pop.bias[logical];
            if (pop.model == NeuronModel::ALIF) {
              blk.vars[kVarBeta] = pop.alif_beta;
              blk.vars[kVarRho] = pop.alif_rho;
            }
            if (pop.learning == LearningRule::STDP) {
              blk.vars[kVarLastPost] = kTimeNever;
              blk.vars[kVarT] = 0;
            }
          } else {
            const uint16_t btau = pop.model == NeuronModel::DHLIF
                                      ? pop.branch_tau[m]
                                      : 0;
            blk.vars = lif_vars(0, btau, 0, 0);
            blk.vars[kVarCls] = kClsBranch;
            blk.vars[kVarLtgt] = static_cast<uint16_t>(
                a->conv_layout
                    ? a->slot_base + (members - 1) * span * a->cpn +
                          (local - a->slot_base - m * span * a->cpn)
                    : a->slot_base + (members - 1) * bsz + i);
          }
          // Weight tables.
          if (a->conv_layout && info.conv_fed) {
            if (members == 1 || !soma) {
              const int c = a->chan_lo +
                            (a->conv_layout ? static_cast<int>(i % a->cpn) : 0);
              blk.shared_wbase = true;
              blk.wbase = bank_at.at({a, c, members == 1 ? 0 : m});
            }
          } else if (!a->conv_layout && (members == 1 || !soma)) {
            const auto& sl = info.slots[logical];
            const uint32_t f = static_cast<uint32_t>(sl.size());
            uint32_t lo = 0, hi = f;
            if (members > 1) {
              const uint32_t cd = plan.chunk_by_rank ? (f + acc - 1) / acc
                                                     : plan.chunk;
              lo = std::min<uint32_t>(m * cd, f);
              hi = m == acc - 1 ? f : std::min<uint32_t>(lo + cd, f);
            }
            for (uint32_t r = lo; r < hi; r++)
              blk.weights.push_back(sl[r].w);
            if (info.dense()) {
              blk.axbits = static_cast<uint16_t>(hi - lo);
            } else if (!sl.empty() || info.sparse_fed || info.full_fed) {
              blk.axbits = static_cast<uint16_t>(info.axon_space);
              blk.bitmap_words.assign((info.axon_space + 15) / 16, 0);
              for (uint32_t r = lo; r < hi; r++) {
                const uint32_t a_comb =
                    b.pops[a->pop].axon_off.at(sl[r].link) + sl[r].src;
                blk.bitmap_words[a_comb / 16] |=
                    static_cast<uint16_t>(1u << (a_comb % 16));
              }
            }
            if (pop.learning == LearningRule::STDP)
              blk.extra.assign(hi - lo, kTimeNever);
            if (pop.learning == LearningRule::AccumFC)
              blk.extra.assign(hi - lo, 0);
          }
          if (soma) soma_slots.push_back({a->pop, logical});
        }
      }
    }
    std::vector<uint16_t> bases;
    cursor = place_blocks(data, bases, blocks, cursor);

    (void)soma_slots;
    for (const NcAlloc* a : allocs) {
      const int members = map.pops[a->pop].members;
      for (int i = 0; i < a->b; i++) {
        uint32_t logical;
        uint16_t local;
        if (a->conv_layout) {
          const int q = a->pos_lo + i / a->cpn;
          const int c = a->chan_lo + i % a->cpn;
          const int span = a->pos_hi - a->pos_lo;
          local = static_cast<uint16_t>(a->slot_base +
                                        (members - 1) * span * a->cpn +
                                        (q - a->pos_lo) * a->cpn +
                                        (c - a->chan_lo));
          logical = static_cast<uint32_t>(
              c * (net.pops[a->pop].shape.h * net.pops[a->pop].shape.w) + q);
        } else {
          local = static_cast<uint16_t>(a->slot_base + (members - 1) * a->b +
                                        i);
          logical = static_cast<uint32_t>(a->logical_lo + i);
        }
        art.pops[a->pop].somas[logical] =
            SomaLoc{place.at[cc], static_cast<uint8_t>(nc), local,
                    bases[local]};
      }
    }

    // Emit config words for this core.
    cfg::append_program(words, nc, build_preset(popt));
    std::vector<uint16_t> used(data.begin(), data.begin() + cursor);
    cfg::append_nc_data(words, nc, 0, used);
    for (uint16_t u = 0; u < total_units; u++)
      cfg::append_block_base(words, nc, u, bases[u]);
    cfg::append_neurons_hosted(words, nc, total_units);

    // Rough INTEG+FIRE cycle estimate for the budget.
    uint64_t est = 0;
    for (const NcAlloc* a : allocs) {
      uint64_t fan = 0;
      for (int i = 0; i < a->b; i++) {
        const uint32_t logical =
            a->conv_layout
                ? 0  // conv fan-ins are uniform; use the first neuron
                : static_cast<uint32_t>(a->logical_lo + i);
        fan += fans[a->pop].empty() ? 0 : fans[a->pop][logical];
      }
      est += fan / 10 * 8;  // 10% spike rate, ~8 cycles per event
      est += static_cast<uint64_t>(a->b) * map.pops[a->pop].members * 16;
    }
    cc_cycles[cc] += est;

    const Coord dst = place.at[cc];
    for (const auto& [addr, value] : words)
      art.config_stream.push_back(Packet::mem_write(dst, addr, value));
    words.clear();
  }

  // Table config words per CC.
  for (int cc = 0; cc < map.num_ccs; cc++) {
    cfg::Words tw;
    const FanInTable& fi = b.fan_in[cc];
    for (uint32_t i = 0; i < fi.dt.size(); i++)
      if (fi.dt[i].occupied) cfg::append_fanin_de(tw, i, fi.dt[i]);
    for (uint32_t i = 0; i < fi.it.size(); i++)
      cfg::append_fanin_ie(tw, i, fi.it[i]);
    const FanOutTable& fo = fan_out[cc];
    for (uint32_t i = 0; i < fo.dt.size(); i++)
      if (fo.dt[i].fwd_count || fo.dt[i].dly_count)
        cfg::append_fanout_de(tw, i, fo.dt[i]);
    for (uint32_t i = 0; i < fo.it.size(); i++)
      cfg::append_fanout_ie(tw, i, fo.it[i]);
    const Coord dst = place.at[cc];
    for (const auto& [addr, value] : tw)
      art.config_stream.push_back(Packet::mem_write(dst, addr, value));
  }

  for (int cc = 0; cc < map.num_ccs; cc++)
    worst_cc_cycles = std::max(worst_cc_cycles, cc_cycles[cc]);
  art.cycle_budget = static_cast<uint64_t>(
      opt.cycle_margin * static_cast<double>(worst_cc_cycles + 64));

  if (storage_out) *storage_out = b.storage;
  return art;
}

Traffic profile_traffic(const Artifact& art, const Placement& place,
                        const CompileOptions& opt) {
  ChipOptions copt;
  copt.rows = opt.rows;
  copt.cols = opt.cols;
  Chip chip(copt);
  load_artifact(chip, art);
  chip.set_record_flows(true);
  std::mt19937_64 rng(opt.seed ^ 0x9E3779B97F4A7C15ull);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < opt.profile_timesteps; t++) {
    std::vector<Chip::InputSpike> in;
    for (size_t i = 0; i < art.host_inputs.size(); i++)
      if (u(rng) < opt.profile_rate)
        in.push_back({static_cast<uint16_t>(i), 0, false});
    chip.step_timestep(in);
  }
  chip.flush();

  // Coordinates back to logical ids.
  std::map<uint16_t, int> logical_of;
  for (int cc = 0; cc < static_cast<int>(place.at.size()); cc++)
    logical_of[static_cast<uint16_t>((place.at[cc].row << 8) |
                                     place.at[cc].col)] = cc;
  Traffic t;
  t.n = static_cast<int>(place.at.size());
  t.flows.assign(static_cast<size_t>(t.n) * t.n, 0);
  for (const auto& [key, count] : chip.flows()) {
    const auto s = logical_of.find(key.first);
    const auto d = logical_of.find(key.second);
    if (s != logical_of.end() && d != logical_of.end())
      t.flow(s->second, d->second) += count;
  }
  return t;
}

CompileResult compile_network(const LoweredNet& net,
                              const CompileOptions& opt) {
  CompileResult res;
  res.mapping = partition(net, opt);
  res.report.merges = merge_cores(res.mapping, net, opt);
  res.report.num_ccs = res.mapping.num_ccs;
  res.report.num_ncs = res.mapping.num_ncs;
  if (res.mapping.num_ccs > opt.rows * opt.cols)
    throw SimError("network needs " + std::to_string(res.mapping.num_ccs) +
                   " CCs but the grid has " +
                   std::to_string(opt.rows * opt.cols));

  res.placement = place_initial(res.mapping.num_ccs, opt.rows, opt.cols);
  if (opt.placement != CompileOptions::Placement::None &&
      res.mapping.num_ccs > 1) {
    const Artifact profile_art =
        codegen(net, res.mapping, res.placement, opt);
    const Traffic traffic = profile_traffic(profile_art, res.placement, opt);
    res.report.objective_initial = placement_objective(res.placement, traffic);
    if (opt.placement == CompileOptions::Placement::Greedy)
      res.placement = optimize_greedy(res.placement, traffic);
    else
      res.placement = optimize_annealing(res.placement, traffic, opt.seed);
    res.report.objective_final = placement_objective(res.placement, traffic);
  }
  res.artifact =
      codegen(net, res.mapping, res.placement, opt, &res.report.storage);
  res.report.cycle_budget = res.artifact.cycle_budget;
  return res;
}

std::string CompileReport::to_text() const {
  std::ostringstream os;
  os << "ccs_used: " << num_ccs << "\n";
  os << "ncs_used: " << num_ncs << "\n";
  os << "merges: " << merges << "\n";
  os << "placement_objective_initial: " << objective_initial << "\n";
  os << "placement_objective_final: " << objective_final << "\n";
  os << "fanin_des: " << storage.fanin_des << "\n";
  os << "fanin_ies: " << storage.fanin_ies << "\n";
  for (int t = 0; t < 4; t++)
    os << "fanin_ies_type" << t << ": " << storage.fanin_ies_by_type[t]
       << "\n";
  os << "fanout_des: " << storage.fanout_des << "\n";
  os << "fanout_ies: " << storage.fanout_ies << "\n";
  os << "table_entries: " << storage.entries() << "\n";
  os << "table_bits: " << storage.bits() << "\n";
  os << "cycle_budget: " << cycle_budget << "\n";
  return os.str();
}

}  // namespace taibai
