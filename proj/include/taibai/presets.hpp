#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "taibai/isa.hpp"

// Neuron-model program presets and the per-neuron variable ABI they share.
//
// Every neuron block starts with a fixed 12-word variable area, then the
// 4-word weight header (see isa.hpp), then optional bitmap / weight / extra
// arrays. One variable layout for every model keeps mixed-model cores and
// cross-layer core merging simple: programs differ, offsets never do.

namespace taibai {

inline constexpr uint16_t kVarV = 0;      // membrane potential
inline constexpr uint16_t kVarTau = 1;    // leak factor (DIFF reads tau,I)
inline constexpr uint16_t kVarI = 2;      // accumulated current
inline constexpr uint16_t kVarVth = 3;    // threshold
inline constexpr uint16_t kVarBias = 4;   // fused-BN bias
inline constexpr uint16_t kVarCls = 5;    // class id for mixed-core dispatch
inline constexpr uint16_t kVarLtgt = 6;   // local target (PSUM/dendrite out)
inline constexpr uint16_t kVarBeta = 7;   // ALIF: threshold gain / AccumFC: delta
inline constexpr uint16_t kVarRho = 8;    // ALIF: adaptation decay
inline constexpr uint16_t kVarSprev = 9;  // ALIF: last step's spike
inline constexpr uint16_t kVarA = 10;     // ALIF: adaptation / STDP: last post
                                          // AccumFC: learn trigger flag
inline constexpr uint16_t kVarT = 11;     // STDP: local timestep counter
inline constexpr uint16_t kVarWords = 12;
inline constexpr uint16_t kHdrOff = kVarWords;           // header at +12
inline constexpr uint16_t kBlockFixed = kHdrOff + kHdrWords;  // 16 words

// Aliases for the learning presets.
inline constexpr uint16_t kVarDelta = kVarBeta;
inline constexpr uint16_t kVarLastPost = kVarA;
inline constexpr uint16_t kVarLearn = kVarA;
// STDP sentinel: "no spike recorded yet".
inline constexpr uint16_t kTimeNever = 0x7FFF;

// Neuron classes for mixed cores (kVarCls).
inline constexpr uint16_t kClsBranch = 0;  // PSUM / dendrite branch
inline constexpr uint16_t kClsSoma = 1;    // integrating spiking neuron

// Integ-side event handling:
//   Weighted: FINDIDX on the event's axon key, LD weight, LOCACC into I.
//   Conv:     weight address = g*k^2 + l against a shared filter bank.
//   Pool:     every spike accumulates the constant 1.0 (window-OR pooling).
//   Value:    LOCACC the FP16 payload into I.
// accept_values prepends a dispatch on the reserved value axon id so the
// same core also takes FP16 currents (PSUM/dendrite forwards, skip links).
enum class IntegKind { Weighted, Conv, Pool, Value };

// Fire-side model dynamics.
enum class FireKind {
  Lif,         // v' = tau*v + I; spike & reset at v' >= vth
  LifBias,     // same plus fused-BN bias added to v'
  Alif,        // adaptive threshold vth + beta*a
  Integrator,  // never spikes, never resets; emits its potential
  Branch,      // leaky branch: forwards v' to a local soma, no spike
  MixedBranchSoma,  // class dispatch: branch (cls 0) / LIF soma (cls 1)
};

struct PresetOptions {
  IntegKind integ = IntegKind::Weighted;
  FireKind fire = FireKind::Lif;
  bool accept_values = false;
  uint16_t k2 = 0;             // conv: filter size squared (immediate)
  uint16_t send_type = 0;      // kSendNormal or kSendDelayed
  bool stdp = false;           // event-driven STDP on this core's synapses
  bool accum_fc = false;       // accumulated-spike FC learning
  uint16_t stdp_pot_base = 0;  // shared table addresses / constants
  uint16_t stdp_dep_base = 0;
  uint16_t stdp_wmin = 0;
  uint16_t stdp_wmax = 0;
  uint16_t accum_neg_eta = 0;  // FP16 bits of -eta

  bool operator==(const PresetOptions&) const = default;
};

// Builds the program for one neuron core. Plain LIF instantiations stay
// within the 5-instruction integ / 7-instruction fire budget.
Program build_preset(const PresetOptions& opt);
std::string preset_source(const PresetOptions& opt);

// Pure learning-rule updates (also used by the on-chip program tests).
struct StdpParams {
  float a_plus = 1.0f / 64.0f;
  float a_minus = 1.0f / 64.0f;
  float tau_plus = 16.0f;
  float tau_minus = 16.0f;
  uint16_t w_min = 0;                   // FP16 bits
  uint16_t w_max = fp16::kOne;          // FP16 bits
};

// dt > 0 potentiates, dt < 0 depresses, dt == 0 leaves w unchanged; the
// result is clamped to [w_min, w_max].
uint16_t stdp_update(uint16_t w, int dt, const StdpParams& p);

// Tabulated per-|dt| increments used by the on-chip STDP programs
// (premultiplied a*exp(-d/tau), rounded to FP16; index clamps at 31).
inline constexpr int kStdpTableSize = 32;
std::vector<uint16_t> stdp_table(float a, float tau);

// Accumulated-spike FC update: dW[o][i] = mul(mul(-eta, delta[o]), S[i]),
// all in binary16, matching the on-chip program's operation order.
std::vector<uint16_t> accum_fc_update(const std::vector<uint16_t>& spike_counts,
                                      const std::vector<uint16_t>& delta,
                                      uint16_t eta);

}  // namespace taibai
