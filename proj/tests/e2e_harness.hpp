#pragma once

#include <random>
#include <vector>

#include "doctest.h"
#include "reference_sim.hpp"
#include "taibai/artifact.hpp"
#include "taibai/codegen.hpp"

// Compiles a network, runs it on the chip and on the reference simulator
// with identical inputs, and compares output spike trains (and Integrator
// value traces) step for step, plus per-population spike counts.
//
// Weights in the random corpus come from {-2^-12, 0, +2^-12} with bounded
// nonzero fan-in, so every partial binary16 sum is exact and the comparison
// is independent of NoC delivery order.

namespace taibai::reftest {

inline constexpr uint16_t kGridUnit = 0x0C00;  // 2^-12
inline constexpr uint16_t kGridUnitNeg = 0x8C00;

inline uint16_t grid_units(int k) {
  // k * 2^-12, |k| small; exact by construction.
  return fp16::from_float(static_cast<float>(k) / 4096.0f);
}

struct E2EResult {
  std::vector<std::vector<uint32_t>> chip_spikes;  // per step, sorted
  std::vector<std::vector<uint32_t>> ref_spikes;
  std::vector<std::vector<uint16_t>> chip_values;
  std::vector<std::vector<uint16_t>> ref_values;
  RunStats stats;
  std::vector<uint64_t> ref_pop_spikes;
  CompileResult compiled;
};

inline E2EResult run_compare(const LoweredNet& net,
                             const std::vector<std::vector<RefInput>>& inputs,
                             int steps, CompileOptions opt, int threads = 1,
                             bool via_packets = false) {
  E2EResult r;
  r.compiled = compile_network(net, opt);

  ChipOptions copt;
  copt.rows = opt.rows;
  copt.cols = opt.cols;
  copt.threads = threads;
  Chip chip(copt);
  load_artifact(chip, r.compiled.artifact, via_packets);

  ReferenceSim ref(net);
  const int out_n = net.pops[net.output_pop()].shape.size();

  r.chip_spikes.resize(steps);
  r.chip_values.resize(steps);
  for (int t = 0; t < steps; t++) {
    std::vector<Chip::InputSpike> cin;
    static const std::vector<RefInput> empty;
    const auto& rin =
        t < static_cast<int>(inputs.size()) ? inputs[t] : empty;
    for (const auto& in : rin)
      cin.push_back({in.neuron, in.value, in.is_value});
    chip.step_timestep(cin);
    r.ref_spikes.push_back(ref.step(rin));
  }
  chip.flush();
  r.ref_values = ref.output_values();
  r.ref_pop_spikes = ref.pop_spike_counts();

  for (const auto& ev : chip.host_events()) {
    REQUIRE(ev.t < static_cast<uint64_t>(steps));
    if (ev.value) {
      auto& vals = r.chip_values[ev.t];
      if (vals.size() <= ev.index) vals.resize(out_n, 0);
      vals[ev.index] = ev.payload;
    } else {
      r.chip_spikes[ev.t].push_back(ev.index);
    }
  }
  for (auto& v : r.chip_spikes) std::sort(v.begin(), v.end());
  r.stats = chip.stats();
  return r;
}

inline void check_equal(const E2EResult& r, bool values = false) {
  REQUIRE(r.chip_spikes.size() == r.ref_spikes.size());
  for (size_t t = 0; t < r.ref_spikes.size(); t++) {
    CAPTURE(t);
    REQUIRE(r.chip_spikes[t] == r.ref_spikes[t]);
  }
  // Spike totals per population (stats cross-check).
  for (size_t p = 0; p < r.ref_pop_spikes.size(); p++) {
    CAPTURE(p);
    REQUIRE(r.stats.layer_spikes[p] == r.ref_pop_spikes[p]);
  }
  if (values) {
    REQUIRE(r.ref_values.size() <= r.chip_values.size());
    for (size_t t = 0; t < r.ref_values.size(); t++) {
      CAPTURE(t);
      for (size_t i = 0; i < r.ref_values[t].size(); i++) {
        CAPTURE(i);
        REQUIRE(t < r.chip_values.size());
        REQUIRE(i < r.chip_values[t].size());
        REQUIRE(r.chip_values[t][i] == r.ref_values[t][i]);
      }
    }
  }
}

// Poisson spike inputs over `n` input neurons.
inline std::vector<std::vector<RefInput>> poisson_inputs(int n, int steps,
                                                         double rate,
                                                         uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<RefInput>> in(steps);
  for (int t = 0; t < steps; t++)
    for (int i = 0; i < n; i++)
      if (u(rng) < rate) in[t].push_back({static_cast<uint16_t>(i), 0, false});
  return in;
}

// Random weights from the exactness-preserving grid.
inline std::vector<uint16_t> grid_weights(size_t n, double density,
                                          uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<uint16_t> w(n, 0);
  for (auto& x : w) {
    const double r = u(rng);
    if (r < density / 2) x = kGridUnit;
    else if (r < density) x = kGridUnitNeg;
  }
  return w;
}

}  // namespace taibai::reftest
