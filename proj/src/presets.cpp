#include "taibai/presets.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "taibai/assembler.hpp"

namespace taibai {

namespace {

std::string imm(uint16_t v) {
  char buf[16];
  snprintf(buf, sizeof buf, "#0x%X", v);
  return buf;
}

// kSendLocal with the local-target variable offset packed above the type.
std::string local_send_imm() {
  return imm(static_cast<uint16_t>((kVarLtgt << 4) | kSendLocal));
}

std::string plain_loop(const std::string& body) {
  return "loop:\n  RECV\n" + body + "  B loop\n";
}

std::string integ_value() {
  return "loop:\n"
         "  RECV\n"
         "  MOV     R1, EDATA\n"
         "  LOCACC  R1, [NBASE + #2]\n"
         "  B loop\n";
}

// Dispatch on the reserved value axon id, then fall through to the
// weighted/conv/pool body. The value path lands the FP16 payload in I.
std::string with_value_dispatch(const std::string& body) {
  return "loop:\n"
         "  RECV\n"
         "  MOV     R3, EAXG\n"
         "  CMP.EQ.I R3, #0xFFFF\n"
         "  BC      value_ev\n" +
         body +
         "  B       loop\n"
         "value_ev:\n"
         "  MOV     R1, EDATA\n"
         "  LOCACC  R1, [NBASE + #2]\n"
         "  B       loop\n";
}

std::string weighted_body() {
  return "  FINDIDX R1, EAXG, #12\n"
         "  LD      R1, [R1 + #0]\n"
         "  LOCACC  R1, [NBASE + #2]\n";
}

std::string conv_body(uint16_t k2) {
  return "  MOV     R1, EAXG\n"
         "  MUL.I   R1, R1, " + imm(k2) + "\n"
         "  ADD.I   R1, R1, EAXL\n"
         "  LD      R2, [NBASE + #15]\n"
         "  ADD.I   R1, R1, R2\n"
         "  LD      R1, [R1 + #0]\n"
         "  CMP.EQ.I R0, R0\n"
         "  LOCACC  R1, [NBASE + #2]\n";
}

std::string pool_body() {
  return "  MOV     R1, #0x3C00\n"
         "  CMP.EQ.I R0, R0\n"
         "  LOCACC  R1, [NBASE + #2]\n";
}

std::string integ_stdp(const PresetOptions& o) {
  return "loop:\n"
         "  RECV\n"
         "  FINDIDX R1, EAXG, #12\n"
         "  BC      hit\n"
         "  B       loop\n"
         "hit:\n"
         "  LD      R2, [R1 + #0]\n"
         "  LOCACC  R2, [NBASE + #2]\n"  // forward current uses pre-update w
         "  LD      R3, [NBASE + #11]\n"
         "  LD      R4, [NBASE + #10]\n"
         "  CMP.EQ.I R4, #0x7FFF\n"
         "  BC      record\n"
         "  SUB.I   R3, R3, R4\n"
         "  CMP.LT.I R3, #32\n"
         "  BC      dep_ok\n"
         "  MOV     R3, #31\n"
         "dep_ok:\n"
         "  MOV     R5, " + imm(o.stdp_dep_base) + "\n"
         "  ADD.I   R5, R5, R3\n"
         "  LD      R5, [R5 + #0]\n"
         "  SUB     R2, R2, R5\n"
         "  MOV     R6, " + imm(o.stdp_wmin) + "\n"
         "  CMP.GE  R2, R6\n"
         "  BC      dep_store\n"
         "  MOV     R2, R6\n"
         "dep_store:\n"
         "  ST      R2, [R1 + #0]\n"
         "record:\n"
         "  LD      R7, [NBASE + #12]\n"
         "  ADD.I   R7, R7, R1\n"
         "  LD      R8, [NBASE + #11]\n"
         "  ST      R8, [R7 + #0]\n"
         "  B       loop\n";
}

std::string integ_accum_fc() {
  return "loop:\n"
         "  RECV\n"
         "  FINDIDX R1, EAXG, #12\n"
         "  LD      R2, [R1 + #0]\n"
         "  LOCACC  R2, [NBASE + #2]\n"
         "  LD      R3, [NBASE + #12]\n"
         "  ADD.I   R3, R3, R1\n"
         "  LD      R4, [R3 + #0]\n"
         "  MOV     R5, #0x3C00\n"
         "  ADD     R4, R4, R5\n"
         "  ST      R4, [R3 + #0]\n"
         "  B       loop\n";
}

std::string fire_lif(uint16_t send_type, bool bias) {
  std::string s =
      "  LD      R1, [NBASE + #0]\n"
      "  DIFF    R1, [NBASE + #1]\n";
  if (bias) {
    s += "  LD      R3, [NBASE + #4]\n"
         "  ADD     R1, R1, R3\n";
  }
  s += "  LD      R2, [NBASE + #3]\n"
       "  CMP.GE  R1, R2\n"
       "  SEND    R1, " + imm(send_type) + "\n"
       "  MULC.I  R1, R1, #0\n"
       "  ST      R1, [NBASE + #0]\n";
  return s;
}

std::string fire_alif(uint16_t send_type) {
  return "  LD      R1, [NBASE + #10]\n"
         "  DIFF    R1, [NBASE + #8]\n"
         "  ST      R1, [NBASE + #10]\n"
         "  LD      R2, [NBASE + #7]\n"
         "  MUL     R2, R2, R1\n"
         "  LD      R3, [NBASE + #3]\n"
         "  ADD     R2, R2, R3\n"
         "  LD      R1, [NBASE + #0]\n"
         "  DIFF    R1, [NBASE + #1]\n"
         "  CMP.GE  R1, R2\n"
         "  SEND    R1, " + imm(send_type) + "\n"
         "  MULC.I  R1, R1, #0\n"
         "  ST      R1, [NBASE + #0]\n"
         "  MOV     R4, #0x3C00\n"
         "  LOCACC  R4, [NBASE + #9]\n";
}

std::string fire_integrator() {
  return "  LD      R1, [NBASE + #0]\n"
         "  DIFF    R1, [NBASE + #1]\n"
         "  ST      R1, [NBASE + #0]\n"
         "  CMP.EQ.I R0, R0\n"
         "  SEND    R1, #2\n";
}

std::string fire_branch() {
  return "  LD      R1, [NBASE + #0]\n"
         "  DIFF    R1, [NBASE + #1]\n"
         "  ST      R1, [NBASE + #0]\n"
         "  CMP.EQ.I R0, R0\n"
         "  SEND    R1, " + local_send_imm() + "\n";
}

std::string fire_mixed(uint16_t send_type) {
  return "  LD      R3, [NBASE + #5]\n"
         "  CMP.EQ.I R3, #1\n"
         "  BC      soma\n" +
         fire_branch() +
         "  B       fend\n"
         "soma:\n" +
         fire_lif(send_type, false) +
         "fend:\n";
}

std::string fire_stdp(const PresetOptions& o) {
  return "  LD      R1, [NBASE + #0]\n"
         "  DIFF    R1, [NBASE + #1]\n"
         "  LD      R2, [NBASE + #3]\n"
         "  CMP.GE  R1, R2\n"
         "  BC      fired\n"
         "  ST      R1, [NBASE + #0]\n"
         "  LD      R3, [NBASE + #11]\n"
         "  ADD.I   R3, R3, #1\n"
         "  ST      R3, [NBASE + #11]\n"
         "  B       fend\n"
         "fired:\n"
         "  MOV     R0, #0\n"
         "  ST      R0, [NBASE + #0]\n"
         "  SEND    R1, " + imm(o.send_type) + "\n"
         "  LD      R3, [NBASE + #11]\n"
         "  ST      R3, [NBASE + #10]\n"
         "  LD      R4, [NBASE + #12]\n"
         "  LD      R5, [NBASE + #15]\n"
         "  MOV     R6, #0\n"
         "potloop:\n"
         "  CMP.GE.I R6, R4\n"
         "  BC      potdone\n"
         "  ADD.I   R7, R5, R6\n"
         "  ADD.I   R8, R7, R4\n"
         "  LD      R9, [R8 + #0]\n"
         "  CMP.EQ.I R9, #0x7FFF\n"
         "  BC      potnext\n"
         "  SUB.I   R9, R3, R9\n"
         "  CMP.LT.I R9, #32\n"
         "  BC      potok\n"
         "  MOV     R9, #31\n"
         "potok:\n"
         "  MOV     R10, " + imm(o.stdp_pot_base) + "\n"
         "  ADD.I   R10, R10, R9\n"
         "  LD      R10, [R10 + #0]\n"
         "  LD      R11, [R7 + #0]\n"
         "  ADD     R11, R11, R10\n"
         "  MOV     R12, " + imm(o.stdp_wmax) + "\n"
         "  CMP.GE  R11, R12\n"
         "  BC      clamp_hi\n"
         "  B       potstore\n"
         "clamp_hi:\n"
         "  MOV     R11, R12\n"
         "potstore:\n"
         "  ST      R11, [R7 + #0]\n"
         "potnext:\n"
         "  ADD.I   R6, R6, #1\n"
         "  B       potloop\n"
         "potdone:\n"
         "  LD      R3, [NBASE + #11]\n"
         "  ADD.I   R3, R3, #1\n"
         "  ST      R3, [NBASE + #11]\n"
         "fend:\n";
}

std::string fire_accum_fc(const PresetOptions& o) {
  return fire_lif(o.send_type, false) +
         "  LD      R3, [NBASE + #10]\n"
         "  CMP.NE.I R3, #0\n"
         "  BC      learn\n"
         "  B       fend\n"
         "learn:\n"
         "  MOV     R3, #0\n"
         "  ST      R3, [NBASE + #10]\n"
         "  LD      R4, [NBASE + #7]\n"
         "  MOV     R5, " + imm(o.accum_neg_eta) + "\n"
         "  MUL     R5, R5, R4\n"
         "  LD      R6, [NBASE + #12]\n"
         "  LD      R7, [NBASE + #15]\n"
         "  MOV     R8, #0\n"
         "lloop:\n"
         "  CMP.GE.I R8, R6\n"
         "  BC      fend\n"
         "  ADD.I   R9, R7, R8\n"
         "  ADD.I   R10, R9, R6\n"
         "  LD      R11, [R10 + #0]\n"
         "  MUL     R11, R11, R5\n"
         "  LD      R12, [R9 + #0]\n"
         "  ADD     R12, R12, R11\n"
         "  ST      R12, [R9 + #0]\n"
         "  MOV     R11, #0\n"
         "  ST      R11, [R10 + #0]\n"
         "  ADD.I   R8, R8, #1\n"
         "  B       lloop\n"
         "fend:\n";
}

}  // namespace

std::string preset_source(const PresetOptions& opt) {
  std::string integ;
  if (opt.stdp) {
    integ = integ_stdp(opt);
  } else if (opt.accum_fc) {
    integ = integ_accum_fc();
  } else if (opt.integ == IntegKind::Value) {
    integ = integ_value();
  } else {
    std::string body;
    switch (opt.integ) {
      case IntegKind::Weighted: body = weighted_body(); break;
      case IntegKind::Conv: body = conv_body(opt.k2); break;
      case IntegKind::Pool: body = pool_body(); break;
      default: break;
    }
    integ = opt.accept_values ? with_value_dispatch(body) : plain_loop(body);
  }
  std::string fire;
  if (opt.stdp) {
    fire = fire_stdp(opt);
  } else if (opt.accum_fc) {
    fire = fire_accum_fc(opt);
  } else {
    switch (opt.fire) {
      case FireKind::Lif: fire = fire_lif(opt.send_type, false); break;
      case FireKind::LifBias: fire = fire_lif(opt.send_type, true); break;
      case FireKind::Alif: fire = fire_alif(opt.send_type); break;
      case FireKind::Integrator: fire = fire_integrator(); break;
      case FireKind::Branch: fire = fire_branch(); break;
      case FireKind::MixedBranchSoma: fire = fire_mixed(opt.send_type); break;
    }
  }
  return ".integ\n" + integ + ".fire\n" + fire;
}

Program build_preset(const PresetOptions& opt) {
  return assemble(preset_source(opt)).program;
}

std::vector<uint16_t> stdp_table(float a, float tau) {
  std::vector<uint16_t> t(kStdpTableSize);
  for (int d = 0; d < kStdpTableSize; d++)
    t[d] = fp16::from_float(a * std::exp(-static_cast<float>(d) / tau));
  return t;
}

uint16_t stdp_update(uint16_t w, int dt, const StdpParams& p) {
  if (dt == 0) return w;
  if (dt > 0) {
    const int d = dt < kStdpTableSize ? dt : kStdpTableSize - 1;
    const uint16_t inc =
        fp16::from_float(p.a_plus * std::exp(-static_cast<float>(d) / p.tau_plus));
    const uint16_t r = fp16::add(w, inc);
    return fp16::lt(p.w_max, r) ? p.w_max : r;
  }
  const int d = -dt < kStdpTableSize ? -dt : kStdpTableSize - 1;
  const uint16_t dec =
      fp16::from_float(p.a_minus * std::exp(-static_cast<float>(d) / p.tau_minus));
  const uint16_t r = fp16::sub(w, dec);
  return fp16::lt(r, p.w_min) ? p.w_min : r;
}

std::vector<uint16_t> accum_fc_update(const std::vector<uint16_t>& spike_counts,
                                      const std::vector<uint16_t>& delta,
                                      uint16_t eta) {
  std::vector<uint16_t> dw(delta.size() * spike_counts.size());
  const uint16_t neg_eta = fp16::neg(eta);
  for (size_t o = 0; o < delta.size(); o++) {
    const uint16_t f = fp16::mul(neg_eta, delta[o]);
    for (size_t i = 0; i < spike_counts.size(); i++)
      dw[o * spike_counts.size() + i] = fp16::mul(f, spike_counts[i]);
  }
  return dw;
}

}  // namespace taibai
