#include "reference_sim.hpp"

#include <algorithm>

#include "taibai/tables.hpp"

namespace taibai::reftest {

using fp16::add;
using fp16::diff_step;
using fp16::ge;
using fp16::mul;

ReferenceSim::ReferenceSim(const LoweredNet& net) : net_(net) {
  const size_t np = net_.pops.size();
  slots_.resize(np);
  slot_base_.resize(np);
  w_.resize(np);
  pre_t_.resize(np);
  s_acc_.resize(np);
  v_.resize(np);
  acc_.resize(np);
  adapt_.resize(np);
  sprev_.resize(np);
  last_post_.resize(np);
  branch_v_.resize(np);
  branch_acc_.resize(np);
  fired_.resize(np);
  fired_prev_.resize(np);
  hist_.resize(np);
  stdp_pot_.resize(np);
  stdp_dep_.resize(np);
  pop_spikes_.assign(np, 0);

  for (size_t p = 0; p < np; p++) {
    const int n = net_.pops[p].shape.size();
    slots_[p].resize(n);
    v_[p].assign(n, 0);
    acc_[p].assign(n, 0);
    adapt_[p].assign(n, 0);
    sprev_[p].assign(n, 0);
    last_post_[p].assign(n, kTimeNever);
    fired_[p].assign(n, 0);
    fired_prev_[p].assign(n, 0);
    if (net_.pops[p].model == NeuronModel::DHLIF) {
      branch_v_[p].assign(n,
                          std::vector<uint16_t>(net_.pops[p].dh_branches, 0));
      branch_acc_[p].assign(
          n, std::vector<uint16_t>(net_.pops[p].dh_branches, 0));
    }
    if (net_.pops[p].learning == LearningRule::STDP) {
      stdp_pot_[p] = stdp_table(net_.pops[p].stdp.a_plus,
                                net_.pops[p].stdp.tau_plus);
      stdp_dep_[p] = stdp_table(net_.pops[p].stdp.a_minus,
                                net_.pops[p].stdp.tau_minus);
    }
  }

  // Build per-neuron slot lists exactly as the compiler lays out weights:
  // links in order, sources ascending; conv expands (cin, ky, kx) per
  // destination; pool and value links contribute no slots.
  for (size_t li = 0; li < net_.links.size(); li++) {
    const LoweredLink& l = net_.links[li];
    if (l.value_scale != 0 || l.kind == LinkKind::Pool) continue;
    const int dst = l.dst;
    const Shape ss = l.src < 0 ? net_.input : net_.pops[l.src].shape;
    const Shape ds = net_.pops[dst].shape;
    switch (l.kind) {
      case LinkKind::Full: {
        for (int d = 0; d < ds.size(); d++)
          for (int s = 0; s < ss.size(); s++)
            slots_[dst][d].push_back({static_cast<int>(li),
                                      static_cast<uint32_t>(s)});
        break;
      }
      case LinkKind::Sparse: {
        // Ascending (dst, src) so each neuron's slots are src-sorted.
        std::vector<Edge> edges = l.edges;
        std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
          return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
        });
        for (const auto& e : edges)
          slots_[dst][e.dst].push_back({static_cast<int>(li), e.src});
        break;
      }
      case LinkKind::Conv: {
        for (int co = 0; co < ds.c; co++)
          for (int y = 0; y < ds.h; y++)
            for (int x = 0; x < ds.w; x++) {
              const int d = (co * ds.h + y) * ds.w + x;
              for (int ci = 0; ci < ss.c; ci++)
                for (int ky = 0; ky < l.k; ky++)
                  for (int kx = 0; kx < l.k; kx++) {
                    const int sy = y * l.stride + ky - l.pad;
                    const int sx = x * l.stride + kx - l.pad;
                    if (sy < 0 || sy >= ss.h || sx < 0 || sx >= ss.w) continue;
                    const uint32_t s =
                        static_cast<uint32_t>((ci * ss.h + sy) * ss.w + sx);
                    slots_[dst][d].push_back({static_cast<int>(li), s});
                  }
            }
        break;
      }
      case LinkKind::Pool:
        break;
    }
  }

  // Freeze per-neuron weight tables in slot order.
  for (size_t p = 0; p < np; p++) {
    const int n = net_.pops[p].shape.size();
    slot_base_[p].assign(n + 1, 0);
    for (int d = 0; d < n; d++)
      slot_base_[p][d + 1] = slot_base_[p][d] +
                             static_cast<uint32_t>(slots_[p][d].size());
    w_[p].assign(slot_base_[p][n], 0);
    for (int d = 0; d < n; d++) {
      const Shape ds = net_.pops[p].shape;
      for (size_t i = 0; i < slots_[p][d].size(); i++) {
        const SlotRef& sr = slots_[p][d][i];
        const LoweredLink& l = net_.links[sr.link];
        const Shape ss = l.src < 0 ? net_.input : net_.pops[l.src].shape;
        uint16_t wv = 0;
        if (l.kind == LinkKind::Full) {
          wv = l.weights[static_cast<size_t>(d) * ss.size() + sr.src];
        } else if (l.kind == LinkKind::Sparse) {
          for (const auto& e : l.edges)
            if (e.dst == static_cast<uint32_t>(d) && e.src == sr.src) {
              wv = e.weight;
              break;
            }
        } else {  // conv: weight table [c_out][c_in*k*k]
          const int hw = ds.h * ds.w;
          const int co = d / hw;
          const int y = (d % hw) / ds.w, x = d % ds.w;
          const int ci = static_cast<int>(sr.src) / (ss.h * ss.w);
          const int sy = (static_cast<int>(sr.src) % (ss.h * ss.w)) / ss.w;
          const int sx = static_cast<int>(sr.src) % ss.w;
          const int ky = sy - (y * l.stride - l.pad);
          const int kx = sx - (x * l.stride - l.pad);
          wv = l.weights[((static_cast<size_t>(co) * ss.c + ci) * l.k + ky) *
                             l.k +
                         kx];
        }
        w_[p][slot_base_[p][d] + i] = wv;
      }
    }
    if (net_.pops[p].learning == LearningRule::STDP)
      pre_t_[p].assign(w_[p].size(), kTimeNever);
    if (net_.pops[p].learning == LearningRule::AccumFC)
      s_acc_[p].assign(w_[p].size(), 0);
  }
}

std::vector<uint32_t> ReferenceSim::step(const std::vector<RefInput>& inputs) {
  const size_t np = net_.pops.size();
  // Integrate: per destination, links in order, sources ascending. The slot
  // lists already encode that order for weighted links.
  for (size_t p = 0; p < np; p++) {
    const LoweredPop& pop = net_.pops[p];
    const uint16_t t_now = static_cast<uint16_t>(now_ & 0x7FFF);
    for (int d = 0; d < pop.shape.size(); d++) {
      for (size_t i = 0; i < slots_[p][d].size(); i++) {
        const SlotRef& sr = slots_[p][d][i];
        const LoweredLink& l = net_.links[sr.link];
        bool spiked = false;
        if (l.src < 0) {
          for (const auto& in : inputs)
            if (!in.is_value && in.neuron == sr.src) {
              spiked = true;
              break;
            }
        } else {
          spiked = fired_prev_[l.src][sr.src] != 0;
        }
        if (!spiked) continue;
        const uint32_t slot = slot_base_[p][d] + static_cast<uint32_t>(i);
        if (pop.model == NeuronModel::DHLIF) {
          // Branch b owns the contiguous slot chunk [b*ceil(F/B), ...).
          const uint32_t total = slot_base_[p][d + 1] - slot_base_[p][d];
          const uint32_t chunk =
              (total + pop.dh_branches - 1) / pop.dh_branches;
          const uint32_t b = static_cast<uint32_t>(i) / std::max(chunk, 1u);
          branch_acc_[p][d][b] = add(branch_acc_[p][d][b], w_[p][slot]);
          continue;
        }
        if (pop.learning == LearningRule::STDP) {
          // Forward current uses the pre-update weight; depression follows.
          acc_[p][d] = add(acc_[p][d], w_[p][slot]);
          if (last_post_[p][d] != kTimeNever) {
            int dd = static_cast<int>(t_now) - last_post_[p][d];
            if (dd > kStdpTableSize - 1) dd = kStdpTableSize - 1;
            uint16_t nw = fp16::sub(w_[p][slot], stdp_dep_[p][dd]);
            if (fp16::lt(nw, pop.stdp.w_min)) nw = pop.stdp.w_min;
            w_[p][slot] = nw;
          }
          pre_t_[p][slot] = t_now;
        } else {
          acc_[p][d] = add(acc_[p][d], w_[p][slot]);
          if (pop.learning == LearningRule::AccumFC)
            s_acc_[p][slot] = add(s_acc_[p][slot], fp16::kOne);
        }
      }
    }
  }
  // Pool links count 1.0 per upstream spike; value links add their scale
  // `delay` steps after the source fired.
  for (const auto& l : net_.links) {
    if (l.kind == LinkKind::Pool) {
      const Shape ss = l.src < 0 ? net_.input : net_.pops[l.src].shape;
      const Shape ds = net_.pops[l.dst].shape;
      for (int c = 0; c < ss.c; c++)
        for (int y = 0; y < ss.h; y++)
          for (int x = 0; x < ss.w; x++) {
            const int s = (c * ss.h + y) * ss.w + x;
            const bool spiked = l.src < 0
                                    ? false
                                    : fired_prev_[l.src][s] != 0;
            if (!spiked) continue;
            const int d = (c * ds.h + y / l.window) * ds.w + x / l.window;
            acc_[l.dst][d] = add(acc_[l.dst][d], fp16::kOne);
          }
    }
  }
  // Inter-population value links (skip connections): each source spike at
  // step now-1-delay adds the link's scale to the destination current.
  for (const auto& l : net_.links) {
    if (l.value_scale == 0 || l.src < 0) continue;
    const int64_t when = static_cast<int64_t>(now_) - 1 - l.delay;
    if (when < 0) continue;
    const auto& fired = hist_[l.src][when];
    for (const auto& e : l.edges) {
      if (!fired[e.src]) continue;
      acc_[l.dst][e.dst] = add(acc_[l.dst][e.dst], l.value_scale);
    }
  }

  // External value inputs: payload accumulated through the input link's
  // connectivity, weights ignored.
  for (const auto& in : inputs) {
    if (!in.is_value) continue;
    for (const auto& l : net_.links) {
      if (l.src != -1 || l.value_scale != 0) continue;
      if (l.kind == LinkKind::Full) {
        const int n = net_.pops[l.dst].shape.size();
        for (int d = 0; d < n; d++)
          acc_[l.dst][d] = add(acc_[l.dst][d], in.value);
      } else if (l.kind == LinkKind::Sparse) {
        for (const auto& e : l.edges)
          if (e.src == in.neuron)
            acc_[l.dst][e.dst] = add(acc_[l.dst][e.dst], in.value);
      }
    }
  }

  // Fire.
  std::vector<uint32_t> out;
  for (size_t p = 0; p < np; p++) {
    const LoweredPop& pop = net_.pops[p];
    const int n = pop.shape.size();
    std::vector<uint16_t> vals;
    for (int d = 0; d < n; d++) {
      const uint16_t tau = pop.tau_per.empty() ? pop.tau : pop.tau_per[d];
      const uint16_t vth = pop.vth_per.empty() ? pop.vth : pop.vth_per[d];
      uint16_t current = acc_[p][d];
      acc_[p][d] = 0;
      bool spike = false;
      switch (pop.model) {
        case NeuronModel::LIF: {
          uint16_t vp = diff_step(v_[p][d], tau, current);
          if (!pop.bias.empty()) vp = add(vp, pop.bias[d]);
          spike = ge(vp, vth);
          v_[p][d] = spike ? 0 : vp;
          break;
        }
        case NeuronModel::ALIF: {
          const uint16_t ap =
              diff_step(adapt_[p][d], pop.alif_rho, sprev_[p][d]);
          adapt_[p][d] = ap;
          sprev_[p][d] = 0;
          const uint16_t theta = add(mul(pop.alif_beta, ap), vth);
          uint16_t vp = diff_step(v_[p][d], tau, current);
          if (!pop.bias.empty()) vp = add(vp, pop.bias[d]);
          spike = ge(vp, theta);
          v_[p][d] = spike ? 0 : vp;
          if (spike) sprev_[p][d] = fp16::kOne;
          break;
        }
        case NeuronModel::Integrator: {
          const uint16_t vp = diff_step(v_[p][d], tau, current);
          v_[p][d] = vp;
          if (static_cast<int>(p) == net_.output_pop()) vals.push_back(vp);
          break;
        }
        case NeuronModel::DHLIF: {
          uint16_t soma_i = 0;
          for (int b = 0; b < pop.dh_branches; b++) {
            const uint16_t vb = diff_step(branch_v_[p][d][b], pop.branch_tau[b],
                                          branch_acc_[p][d][b]);
            branch_acc_[p][d][b] = 0;
            branch_v_[p][d][b] = vb;
            soma_i = add(soma_i, vb);
          }
          const uint16_t vp = diff_step(v_[p][d], tau, soma_i);
          spike = ge(vp, vth);
          v_[p][d] = spike ? 0 : vp;
          break;
        }
      }
      fired_[p][d] = spike ? 1 : 0;
      if (spike) {
        pop_spikes_[p]++;
        // STDP potentiation on the post spike.
        if (pop.learning == LearningRule::STDP) {
          const uint16_t t_now = static_cast<uint16_t>(now_ & 0x7FFF);
          for (uint32_t s = slot_base_[p][d]; s < slot_base_[p][d + 1]; s++) {
            if (pre_t_[p][s] == kTimeNever) continue;
            int dd = static_cast<int>(t_now) - pre_t_[p][s];
            if (dd > kStdpTableSize - 1) dd = kStdpTableSize - 1;
            uint16_t nw = add(w_[p][s], stdp_pot_[p][dd]);
            if (fp16::lt(pop.stdp.w_max, nw)) nw = pop.stdp.w_max;
            w_[p][s] = nw;
          }
          last_post_[p][d] = static_cast<uint16_t>(now_ & 0x7FFF);
        }
        if (static_cast<int>(p) == net_.output_pop())
          out.push_back(static_cast<uint32_t>(d));
      }
    }
    if (static_cast<int>(p) == net_.output_pop() &&
        pop.model == NeuronModel::Integrator)
      out_values_.push_back(vals);
  }
  for (size_t p = 0; p < np; p++) hist_[p].push_back(fired_[p]);
  std::swap(fired_, fired_prev_);
  for (auto& f : fired_) std::fill(f.begin(), f.end(), 0);
  now_++;
  return out;
}

RefOutputs ReferenceSim::run(
    const std::vector<std::vector<RefInput>>& inputs_per_step, int steps) {
  RefOutputs out;
  for (int t = 0; t < steps; t++) {
    const std::vector<RefInput> empty;
    const auto& in =
        t < static_cast<int>(inputs_per_step.size()) ? inputs_per_step[t]
                                                     : empty;
    out.spikes.push_back(step(in));
  }
  out.values = out_values_;
  out.pop_spikes = pop_spikes_;
  return out;
}

void ReferenceSim::accum_learn(const std::vector<uint16_t>& delta) {
  const int p = net_.output_pop();
  const LoweredPop& pop = net_.pops[p];
  if (pop.learning != LearningRule::AccumFC)
    throw SimError("output population has no accumulated-spike learning");
  const uint16_t neg_eta = fp16::neg(pop.eta);
  for (int d = 0; d < pop.shape.size(); d++) {
    const uint16_t f = mul(neg_eta, delta[d]);
    for (uint32_t s = slot_base_[p][d]; s < slot_base_[p][d + 1]; s++) {
      w_[p][s] = add(w_[p][s], mul(s_acc_[p][s], f));
      s_acc_[p][s] = 0;
    }
  }
}

}  // namespace taibai::reftest
