#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "taibai/fp16.hpp"

// The neuron-core instruction set.
//
// Every instruction encodes to exactly one 32-bit word:
//
//   [31:26] opcode   [25] dtype (0=FP16, 1=INT16)   [24] uses_imm
//   [23:20] dst      [19:16] src1                   [15:0] imm16 / src2 / mem
//
// The 16-bit field holds, depending on the opcode and uses_imm:
//   - a 16-bit immediate                       (uses_imm = 1, ALU/branch/SEND)
//   - a source register id 0..20               (uses_imm = 0, ALU ops)
//   - a memory operand  (base_reg<<11)|offset  (uses_imm = 0, LD/ST/LOCACC/DIFF)
//   - an absolute word address                 (uses_imm = 1, LD/ST/LOCACC/DIFF)
//   - (g_reg<<11)|header_offset                (FINDIDX)
//
// Registers 0..15 are general purpose. 16..20 are read-only event registers
// loaded by RECV (and by the fire-stage per-neuron dispatch): ENID = local
// neuron id, EAXG = global axon id, EAXL = local axon id, EDATA = payload,
// NBASE = word address of the neuron's data block. Event registers are legal
// wherever the operand lives in the 16-bit field (reg-src2, memory base);
// dst and src1 are general-purpose only.
//
// The flag is the single condition bit: RECV and the fire-stage dispatch set
// it, FINDIDX sets it to the lookup outcome (hit/miss), CMP overwrites it.
// ADDC/SUBC/MULC, LOCACC and SEND execute only while the flag is set.
//
// FINDIDX Rd, Rg, #hdr reads the weight header at NBASE+hdr and resolves the
// compressed weight slot for global axon id Rg (bitmap prefix-popcount, or
// the identity when the header is marked dense). On a hit Rd receives the
// weight's address (wbase + slot); on a miss Rd is untouched.

namespace taibai {

enum class Opcode : uint8_t {
  RECV = 0,
  SEND = 1,
  FINDIDX = 2,
  LOCACC = 3,
  DIFF = 4,
  ADD = 5,
  SUB = 6,
  MUL = 7,
  ADDC = 8,
  SUBC = 9,
  MULC = 10,
  AND = 11,
  OR = 12,
  XOR = 13,
  CMP = 14,
  MOV = 15,
  LD = 16,
  ST = 17,
  B = 18,
  BC = 19,
};
inline constexpr int kNumOpcodes = 20;

enum class DType : uint8_t { FP16 = 0, INT16 = 1 };

// CMP relation selector, carried in the (otherwise unused) dst field.
enum class Rel : uint8_t { EQ = 0, NE = 1, LT = 2, GE = 3 };

// Register file layout.
inline constexpr int kNumGpRegs = 16;
inline constexpr int kRegEnid = 16;
inline constexpr int kRegEaxg = 17;
inline constexpr int kRegEaxl = 18;
inline constexpr int kRegEdata = 19;
inline constexpr int kRegNbase = 20;
inline constexpr int kNumRegs = 21;

const char* reg_name(int r);
const char* opcode_name(Opcode op);
const char* rel_name(Rel r);

// SEND output-event types, low 4 bits of the SEND immediate. For kSendLocal
// the immediate's bits [14:4] give the variable offset (within the firing
// neuron's block) holding the local target neuron id.
// Reserved global axon id marking value-carrying events (FP16 currents).
inline constexpr uint16_t kAxonValue = 0xFFFF;

inline constexpr uint16_t kSendNormal = 0;
inline constexpr uint16_t kSendDelayed = 1;
inline constexpr uint16_t kSendValue = 2;
inline constexpr uint16_t kSendLocal = 3;

struct Instruction {
  Opcode op = Opcode::RECV;
  DType dtype = DType::FP16;
  bool uses_imm = false;
  uint8_t dst = 0;   // 4 bits; relation selector for CMP
  uint8_t src1 = 0;  // 4 bits
  uint16_t field = 0;

  bool operator==(const Instruction&) const = default;

  // Helpers for the packed memory / FINDIDX operand form.
  int mem_base() const { return field >> 11; }
  uint16_t mem_off() const { return field & 0x7FFu; }

  uint32_t encode() const;
  static Instruction decode(uint32_t word);
};

// Per-neuron data block layout. Model variables sit at the start of the
// block (offsets fixed by the preset); the weight header follows them and
// locates this neuron's weight table.
//
//   NBASE + hdr + 0   wcount   number of weight slots (fan-in count)
//   NBASE + hdr + 1   axbits   axon space size in bits (= wcount when dense)
//   NBASE + hdr + 2   flags    bit0: dense (no bitmap; slot = g)
//   NBASE + hdr + 3   wbase    absolute word address of the weight table
//   NBASE + hdr + 4.. bitmap   ceil(axbits/16) words, absent when dense
inline constexpr uint16_t kHdrWcount = 0;
inline constexpr uint16_t kHdrAxbits = 1;
inline constexpr uint16_t kHdrFlags = 2;
inline constexpr uint16_t kHdrWbase = 3;
inline constexpr uint16_t kHdrWords = 4;
inline constexpr uint16_t kHdrFlagDense = 1;

struct Program {
  std::vector<Instruction> integ;
  std::vector<Instruction> fire;

  bool operator==(const Program&) const = default;

  std::vector<uint32_t> encode() const;  // integ size, fire size, words
  static Program decode(const std::vector<uint32_t>& words);
};

// Instruction cycle costs; behavioral stand-in for the pipelined core.
struct CycleCosts {
  uint32_t basic = 1;
  uint32_t mem = 2;  // LD, ST, LOCACC, DIFF
  uint32_t findidx(uint16_t g) const { return (g + 63u) / 64u + 1u; }
  uint32_t of(Opcode op, uint16_t g = 0) const {
    switch (op) {
      case Opcode::LD:
      case Opcode::ST:
      case Opcode::LOCACC:
      case Opcode::DIFF:
        return mem;
      case Opcode::FINDIDX:
        return findidx(g);
      default:
        return basic;
    }
  }
};

struct AluResult {
  uint16_t value;
  bool flag;
};

// Pure ALU semantics shared by the interpreter and its tests. `a` is the
// current destination value (returned unchanged by conditional ops with a
// false flag and by CMP), `b` the operand.
AluResult alu_exec(Opcode op, DType dtype, uint16_t a, uint16_t b, bool flag,
                   Rel rel = Rel::EQ);

// Bitmap lookup used by FINDIDX: if bit `g` of the bitmap is set, returns
// the number of set bits strictly below g (the compressed weight slot).
struct FindIdxResult {
  bool hit;
  uint16_t slot;
};
FindIdxResult findidx(const uint16_t* bitmap_words, uint32_t bit_count,
                      uint32_t g);

class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace taibai
