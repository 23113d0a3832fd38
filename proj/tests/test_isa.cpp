#include "taibai/isa.hpp"

#include <random>
#include <vector>

#include "doctest.h"
#include "taibai/fp16.hpp"

using namespace taibai;

namespace {
uint16_t F(float f) { return fp16::from_float(f); }

// Naive reference for findidx: scan every bit below g.
FindIdxResult findidx_naive(const std::vector<uint16_t>& words,
                            uint32_t bit_count, uint32_t g) {
  if (g >= bit_count) throw SimError("out of range");
  if (!((words[g / 16] >> (g % 16)) & 1)) return {false, 0};
  uint16_t n = 0;
  for (uint32_t i = 0; i < g; i++)
    if ((words[i / 16] >> (i % 16)) & 1) n++;
  return {true, n};
}
}  // namespace

TEST_CASE("alu_exec arithmetic") {
  // FP16 add, exactly representable.
  auto r = alu_exec(Opcode::ADD, DType::FP16, F(1.5f), F(2.25f), false);
  CHECK(r.value == F(3.75f));
  CHECK(r.flag == false);
  // INT16 wraparound.
  r = alu_exec(Opcode::ADD, DType::INT16, 0x7FFF, 0x0001, true);
  CHECK(r.value == 0x8000);
  r = alu_exec(Opcode::SUB, DType::INT16, 0x0000, 0x0001, true);
  CHECK(r.value == 0xFFFF);
  r = alu_exec(Opcode::MUL, DType::INT16, 0x0100, 0x0100, true);
  CHECK(r.value == 0x0000);  // 65536 wraps
  // Conditional no-op when the flag is false.
  r = alu_exec(Opcode::ADDC, DType::INT16, 5, 7, false);
  CHECK(r.value == 5);
  r = alu_exec(Opcode::ADDC, DType::INT16, 5, 7, true);
  CHECK(r.value == 12);
  r = alu_exec(Opcode::MULC, DType::INT16, 0x7C00, 0, true);
  CHECK(r.value == 0);  // conditional zero works on any bit pattern
  // Logic ops are bitwise.
  CHECK(alu_exec(Opcode::AND, DType::FP16, 0xF0F0, 0x0FF0, true).value == 0x00F0);
  CHECK(alu_exec(Opcode::OR, DType::FP16, 0xF000, 0x000F, true).value == 0xF00F);
  CHECK(alu_exec(Opcode::XOR, DType::FP16, 0xFFFF, 0x0F0F, true).value == 0xF0F0);
  CHECK(alu_exec(Opcode::MOV, DType::FP16, 0xDEAD, 0x3C00, true).value == 0x3C00);
}

TEST_CASE("alu_exec comparisons") {
  auto r = alu_exec(Opcode::CMP, DType::FP16, F(1.1f), F(1.0f), false, Rel::GE);
  CHECK(r.flag);
  CHECK(r.value == F(1.1f));  // operands unchanged
  CHECK(alu_exec(Opcode::CMP, DType::FP16, F(1.0f), F(1.0f), false, Rel::GE).flag);
  CHECK_FALSE(alu_exec(Opcode::CMP, DType::FP16, F(0.9f), F(1.0f), false, Rel::GE).flag);
  CHECK(alu_exec(Opcode::CMP, DType::INT16, 0xFFFF, 0x0001, false, Rel::LT).flag);  // -1 < 1
  CHECK_FALSE(alu_exec(Opcode::CMP, DType::FP16, fp16::kQuietNaN, F(1.0f), false, Rel::GE).flag);
  CHECK(alu_exec(Opcode::CMP, DType::FP16, 0x8000, 0x0000, false, Rel::EQ).flag);  // -0 == +0
}

TEST_CASE("instruction encode/decode round trip") {
  std::mt19937 rng(7);
  for (int i = 0; i < 20000; i++) {
    Instruction ins;
    ins.op = static_cast<Opcode>(rng() % kNumOpcodes);
    ins.dtype = static_cast<DType>(rng() % 2);
    ins.uses_imm = rng() % 2;
    ins.dst = rng() % 16;
    ins.src1 = rng() % 16;
    ins.field = static_cast<uint16_t>(rng());
    CHECK(Instruction::decode(ins.encode()) == ins);
  }
  CHECK_THROWS_AS(Instruction::decode(0xFFFFFFFF), SimError);
}

TEST_CASE("findidx spec examples") {
  std::vector<uint16_t> bm = {0x000B};  // 0b00001011: bits 0,1,3
  CHECK(findidx(bm.data(), 8, 3).hit);
  CHECK(findidx(bm.data(), 8, 3).slot == 2);
  CHECK_FALSE(findidx(bm.data(), 8, 2).hit);
  std::vector<uint16_t> one = {0x0001};
  CHECK(findidx(one.data(), 8, 0).hit);
  CHECK(findidx(one.data(), 8, 0).slot == 0);
  CHECK_THROWS_AS(findidx(bm.data(), 8, 8), SimError);
}

TEST_CASE("findidx equals naive prefix popcount") {
  // Exhaustive over all 8-bit bitmaps.
  for (uint32_t bits = 0; bits < 256; bits++) {
    std::vector<uint16_t> bm = {static_cast<uint16_t>(bits)};
    for (uint32_t g = 0; g < 8; g++) {
      const auto a = findidx(bm.data(), 8, g);
      const auto b = findidx_naive(bm, 8, g);
      REQUIRE(a.hit == b.hit);
      if (a.hit) REQUIRE(a.slot == b.slot);
    }
  }
  // Random 2048-bit bitmaps.
  std::mt19937 rng(99);
  for (int trial = 0; trial < 50; trial++) {
    std::vector<uint16_t> bm(128);
    for (auto& w : bm) w = static_cast<uint16_t>(rng());
    for (int k = 0; k < 500; k++) {
      const uint32_t g = rng() % 2048;
      const auto a = findidx(bm.data(), 2048, g);
      const auto b = findidx_naive(bm, 2048, g);
      REQUIRE(a.hit == b.hit);
      if (a.hit) REQUIRE(a.slot == b.slot);
    }
  }
}

TEST_CASE("cycle costs") {
  CycleCosts costs;
  CHECK(costs.of(Opcode::ADD) == 1);
  CHECK(costs.of(Opcode::LD) == 2);
  CHECK(costs.of(Opcode::LOCACC) == 2);
  CHECK(costs.of(Opcode::DIFF) == 2);
  CHECK(costs.of(Opcode::FINDIDX, 0) == 1);
  CHECK(costs.of(Opcode::FINDIDX, 64) == 2);
  CHECK(costs.of(Opcode::FINDIDX, 2047) == 33);
}
