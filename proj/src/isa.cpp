#include "taibai/isa.hpp"

#include <bit>

namespace taibai {

const char* reg_name(int r) {
  static const char* names[kNumRegs] = {
      "R0",  "R1",  "R2",  "R3",   "R4",   "R5",   "R6",
      "R7",  "R8",  "R9",  "R10",  "R11",  "R12",  "R13",
      "R14", "R15", "ENID", "EAXG", "EAXL", "EDATA", "NBASE"};
  return (r >= 0 && r < kNumRegs) ? names[r] : "R?";
}

const char* opcode_name(Opcode op) {
  static const char* names[kNumOpcodes] = {
      "RECV", "SEND", "FINDIDX", "LOCACC", "DIFF", "ADD", "SUB",
      "MUL",  "ADDC", "SUBC",    "MULC",   "AND",  "OR",  "XOR",
      "CMP",  "MOV",  "LD",      "ST",     "B",    "BC"};
  const int i = static_cast<int>(op);
  return (i >= 0 && i < kNumOpcodes) ? names[i] : "?";
}

const char* rel_name(Rel r) {
  switch (r) {
    case Rel::EQ: return "EQ";
    case Rel::NE: return "NE";
    case Rel::LT: return "LT";
    case Rel::GE: return "GE";
  }
  return "?";
}

uint32_t Instruction::encode() const {
  return (static_cast<uint32_t>(op) << 26) |
         (static_cast<uint32_t>(dtype) << 25) |
         (static_cast<uint32_t>(uses_imm ? 1 : 0) << 24) |
         (static_cast<uint32_t>(dst & 0xF) << 20) |
         (static_cast<uint32_t>(src1 & 0xF) << 16) | field;
}

Instruction Instruction::decode(uint32_t word) {
  Instruction ins;
  const uint32_t opc = word >> 26;
  if (opc >= kNumOpcodes) throw SimError("bad opcode in encoded instruction");
  ins.op = static_cast<Opcode>(opc);
  ins.dtype = static_cast<DType>((word >> 25) & 1);
  ins.uses_imm = ((word >> 24) & 1) != 0;
  ins.dst = static_cast<uint8_t>((word >> 20) & 0xF);
  ins.src1 = static_cast<uint8_t>((word >> 16) & 0xF);
  ins.field = static_cast<uint16_t>(word & 0xFFFF);
  return ins;
}

std::vector<uint32_t> Program::encode() const {
  std::vector<uint32_t> out;
  out.reserve(2 + integ.size() + fire.size());
  out.push_back(static_cast<uint32_t>(integ.size()));
  out.push_back(static_cast<uint32_t>(fire.size()));
  for (const auto& i : integ) out.push_back(i.encode());
  for (const auto& i : fire) out.push_back(i.encode());
  return out;
}

Program Program::decode(const std::vector<uint32_t>& words) {
  if (words.size() < 2) throw SimError("truncated program image");
  const uint32_t ni = words[0], nf = words[1];
  if (words.size() != 2 + ni + nf) throw SimError("program image size mismatch");
  Program p;
  p.integ.reserve(ni);
  p.fire.reserve(nf);
  for (uint32_t i = 0; i < ni; i++) p.integ.push_back(Instruction::decode(words[2 + i]));
  for (uint32_t i = 0; i < nf; i++) p.fire.push_back(Instruction::decode(words[2 + ni + i]));
  return p;
}

namespace {

uint16_t int_add(uint16_t a, uint16_t b) {
  return static_cast<uint16_t>(a + b);  // two's-complement wraparound
}
uint16_t int_sub(uint16_t a, uint16_t b) { return static_cast<uint16_t>(a - b); }
uint16_t int_mul(uint16_t a, uint16_t b) {
  return static_cast<uint16_t>(static_cast<uint32_t>(a) * b);
}

bool compare(Rel rel, DType dt, uint16_t a, uint16_t b) {
  if (dt == DType::FP16) {
    switch (rel) {
      case Rel::EQ: return fp16::eq(a, b);
      case Rel::NE: return fp16::ne(a, b);
      case Rel::LT: return fp16::lt(a, b);
      case Rel::GE: return fp16::ge(a, b);
    }
  } else {
    const int16_t sa = static_cast<int16_t>(a), sb = static_cast<int16_t>(b);
    switch (rel) {
      case Rel::EQ: return sa == sb;
      case Rel::NE: return sa != sb;
      case Rel::LT: return sa < sb;
      case Rel::GE: return sa >= sb;
    }
  }
  return false;
}

}  // namespace

AluResult alu_exec(Opcode op, DType dt, uint16_t a, uint16_t b, bool flag,
                   Rel rel) {
  const bool fp = dt == DType::FP16;
  switch (op) {
    case Opcode::ADD:
      return {fp ? fp16::add(a, b) : int_add(a, b), flag};
    case Opcode::SUB:
      return {fp ? fp16::sub(a, b) : int_sub(a, b), flag};
    case Opcode::MUL:
      return {fp ? fp16::mul(a, b) : int_mul(a, b), flag};
    case Opcode::ADDC:
      return {flag ? (fp ? fp16::add(a, b) : int_add(a, b)) : a, flag};
    case Opcode::SUBC:
      return {flag ? (fp ? fp16::sub(a, b) : int_sub(a, b)) : a, flag};
    case Opcode::MULC:
      return {flag ? (fp ? fp16::mul(a, b) : int_mul(a, b)) : a, flag};
    case Opcode::AND:
      return {static_cast<uint16_t>(a & b), flag};
    case Opcode::OR:
      return {static_cast<uint16_t>(a | b), flag};
    case Opcode::XOR:
      return {static_cast<uint16_t>(a ^ b), flag};
    case Opcode::CMP:
      return {a, compare(rel, dt, a, b)};
    case Opcode::MOV:
      return {b, flag};
    default:
      throw SimError(std::string("alu_exec: not an ALU opcode: ") +
                     opcode_name(op));
  }
}

FindIdxResult findidx(const uint16_t* bitmap_words, uint32_t bit_count,
                      uint32_t g) {
  if (g >= bit_count) throw SimError("findidx: axon id out of bitmap range");
  if (!((bitmap_words[g / 16] >> (g % 16)) & 1u)) return {false, 0};
  uint32_t count = 0;
  const uint32_t full = g / 16;
  for (uint32_t w = 0; w < full; w++) count += std::popcount(bitmap_words[w]);
  if (g % 16) {
    const uint16_t mask = static_cast<uint16_t>((1u << (g % 16)) - 1u);
    count += std::popcount(static_cast<uint16_t>(bitmap_words[full] & mask));
  }
  return {true, static_cast<uint16_t>(count)};
}

}  // namespace taibai
