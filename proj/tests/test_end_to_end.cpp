#include "e2e_harness.hpp"
#include "taibai/ir.hpp"

using namespace taibai;
using namespace taibai::reftest;

namespace {

CompileOptions small_grid() {
  CompileOptions opt;
  opt.rows = 4;
  opt.cols = 4;
  opt.placement = CompileOptions::Placement::None;
  return opt;
}

}  // namespace

TEST_CASE("e2e: two FC LIF layers") {
  NetworkIR ir;
  ir.input = {1, 1, 16};
  LayerSpec fc1;
  fc1.kind = LayerKind::FC;
  fc1.out = 12;
  fc1.weights = grid_weights(12 * 16, 0.8, 1);
  fc1.vth = grid_units(3);
  fc1.tau = fp16::from_float(0.5f);
  LayerSpec fc2;
  fc2.kind = LayerKind::FC;
  fc2.out = 5;
  fc2.weights = grid_weights(5 * 12, 0.9, 2);
  fc2.vth = grid_units(2);
  fc2.tau = fp16::from_float(1.0f);
  ir.layers = {fc1, fc2};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(16, 20, 0.4, 7);
  auto r = run_compare(net, inputs, 24, small_grid());
  check_equal(r);
  // The run did something.
  uint64_t total = 0;
  for (const auto& s : r.ref_spikes) total += s.size();
  CHECK(total > 0);
}

TEST_CASE("e2e: conv + pool + fc") {
  NetworkIR ir;
  ir.input = {2, 6, 6};
  LayerSpec conv;
  conv.kind = LayerKind::Conv;
  conv.k = 3;
  conv.stride = 1;
  conv.pad = 1;
  conv.out_channels = 4;
  conv.weights = grid_weights(4 * 2 * 9, 0.8, 3);
  conv.vth = grid_units(2);
  conv.tau = 0;
  LayerSpec pool;
  pool.kind = LayerKind::Pool;
  pool.window = 2;
  LayerSpec fc;
  fc.kind = LayerKind::FC;
  fc.out = 6;
  fc.weights = grid_weights(6 * 4 * 3 * 3, 0.7, 4);
  fc.vth = grid_units(2);
  fc.tau = fp16::from_float(0.5f);
  ir.layers = {conv, pool, fc};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(2 * 6 * 6, 16, 0.3, 9);
  auto r = run_compare(net, inputs, 20, small_grid());
  check_equal(r);
}

TEST_CASE("e2e: sparse with recurrent edges") {
  NetworkIR ir;
  ir.input = {1, 1, 10};
  LayerSpec sp;
  sp.kind = LayerKind::Sparse;
  sp.out = 10;
  std::mt19937 rng(11);
  for (uint32_t s = 0; s < 10; s++)
    for (uint32_t d = 0; d < 10; d++)
      if (rng() % 3 == 0) sp.edges.push_back({s, d, kGridUnit});
  for (uint32_t s = 0; s < 10; s++)
    for (uint32_t d = 0; d < 10; d++)
      if (rng() % 4 == 0)
        sp.recurrent_edges.push_back({s, d, kGridUnit});
  sp.vth = grid_units(2);
  sp.tau = fp16::from_float(0.5f);
  ir.layers = {sp};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(10, 20, 0.5, 13);
  auto r = run_compare(net, inputs, 24, small_grid());
  check_equal(r);
}

TEST_CASE("e2e: ALIF adaptive threshold") {
  NetworkIR ir;
  ir.input = {1, 1, 8};
  LayerSpec a;
  a.kind = LayerKind::FC;
  a.out = 6;
  a.model = NeuronModel::ALIF;
  a.weights = grid_weights(6 * 8, 0.9, 21);
  a.vth = grid_units(2);
  a.tau = fp16::from_float(0.5f);
  a.alif_beta = fp16::from_float(0.25f);
  a.alif_rho = fp16::from_float(0.75f);
  ir.layers = {a};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(8, 24, 0.6, 23);
  auto r = run_compare(net, inputs, 26, small_grid());
  check_equal(r);
}

TEST_CASE("e2e: integrator output emits potentials") {
  NetworkIR ir;
  ir.input = {1, 1, 6};
  LayerSpec l1;
  l1.kind = LayerKind::FC;
  l1.out = 8;
  l1.weights = grid_weights(8 * 6, 0.9, 31);
  l1.vth = grid_units(2);
  l1.tau = 0;
  LayerSpec out;
  out.kind = LayerKind::FC;
  out.out = 3;
  out.model = NeuronModel::Integrator;
  out.weights = grid_weights(3 * 8, 0.9, 32);
  out.tau = fp16::from_float(1.0f);
  ir.layers = {l1, out};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(6, 14, 0.5, 33);
  auto r = run_compare(net, inputs, 18, small_grid());
  check_equal(r, /*values=*/true);
  // The integrator never spikes.
  CHECK(r.stats.layer_spikes[1] == 0);
}

TEST_CASE("e2e: identity skip with delayed value delivery") {
  NetworkIR ir;
  ir.input = {1, 1, 8};
  LayerSpec l1, l2, l3;
  l1.kind = LayerKind::FC;
  l1.out = 8;
  l1.weights = grid_weights(8 * 8, 0.8, 41);
  l1.vth = grid_units(2);
  l1.tau = 0;
  l2 = l1;
  l2.weights = grid_weights(8 * 8, 0.8, 42);
  l3.kind = LayerKind::FC;
  l3.out = 8;
  l3.weights = grid_weights(8 * 8, 0.8, 43);
  l3.vth = grid_units(3);
  l3.tau = fp16::from_float(0.5f);
  ir.layers = {l1, l2, l3};
  SkipSpec sk;
  sk.from = 0;  // l1 output
  sk.to = 2;    // l3 input, one layer skipped -> delay 1
  sk.scale = grid_units(2);
  ir.skips = {sk};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(8, 20, 0.5, 47);
  auto r = run_compare(net, inputs, 24, small_grid());
  check_equal(r);
}

TEST_CASE("e2e: DH-LIF dendrite branches") {
  NetworkIR ir;
  ir.input = {1, 1, 12};
  LayerSpec dh;
  dh.kind = LayerKind::FC;
  dh.out = 5;
  dh.model = NeuronModel::DHLIF;
  dh.dh_branches = 4;
  dh.branch_tau = {0, fp16::from_float(0.5f), fp16::from_float(1.0f),
                   fp16::from_float(0.5f)};
  dh.weights = grid_weights(5 * 12, 0.9, 51);
  dh.vth = grid_units(2);
  dh.tau = fp16::from_float(0.5f);
  ir.layers = {dh};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(12, 20, 0.5, 53);
  auto r = run_compare(net, inputs, 24, small_grid());
  check_equal(r);
}

TEST_CASE("e2e: fan-in expansion through PSUM members") {
  // 64 inputs but a tiny fan-in limit force a PSUM split; the reference is
  // the unsplit recurrence (weights on the exact grid).
  NetworkIR ir;
  ir.input = {1, 1, 64};
  LayerSpec fc;
  fc.kind = LayerKind::FC;
  fc.out = 6;
  fc.weights = grid_weights(6 * 64, 0.6, 61);
  fc.vth = grid_units(3);
  fc.tau = fp16::from_float(0.5f);
  ir.layers = {fc};
  const LoweredNet net = validate_and_lower(ir);
  CompileOptions opt = small_grid();
  opt.fanin_limit = 24;  // forces ceil(64/24) = 3 accumulators + soma
  const auto inputs = poisson_inputs(64, 16, 0.4, 67);
  auto r = run_compare(net, inputs, 20, opt);
  check_equal(r);
  CHECK(r.compiled.mapping.pops[0].members == 4);
}

TEST_CASE("e2e: INIT via packet replay matches direct loading") {
  NetworkIR ir;
  ir.input = {1, 1, 8};
  LayerSpec fc;
  fc.kind = LayerKind::FC;
  fc.out = 4;
  fc.weights = grid_weights(4 * 8, 0.9, 71);
  fc.vth = grid_units(2);
  fc.tau = 0;
  ir.layers = {fc};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(8, 10, 0.5, 73);
  auto a = run_compare(net, inputs, 12, small_grid(), 1, false);
  auto b = run_compare(net, inputs, 12, small_grid(), 1, true);
  check_equal(a);
  check_equal(b);
  CHECK(a.chip_spikes == b.chip_spikes);
}

TEST_CASE("e2e: deterministic across thread counts") {
  NetworkIR ir;
  ir.input = {1, 1, 24};
  LayerSpec fc1, fc2;
  fc1.kind = LayerKind::FC;
  fc1.out = 30;
  fc1.weights = grid_weights(30 * 24, 0.7, 81);
  fc1.vth = grid_units(2);
  fc1.tau = fp16::from_float(0.5f);
  fc2.kind = LayerKind::FC;
  fc2.out = 10;
  fc2.weights = grid_weights(10 * 30, 0.7, 82);
  fc2.vth = grid_units(2);
  fc2.tau = 0;
  ir.layers = {fc1, fc2};
  const LoweredNet net = validate_and_lower(ir);
  const auto inputs = poisson_inputs(24, 16, 0.4, 83);
  auto r1 = run_compare(net, inputs, 20, small_grid(), 1);
  auto r2 = run_compare(net, inputs, 20, small_grid(), 3);
  check_equal(r1);
  CHECK(r1.chip_spikes == r2.chip_spikes);
  CHECK(r1.stats == r2.stats);
}
