#include "taibai/fp16.hpp"

#include <bit>
#include <cstdint>
#include <random>

#include "doctest.h"

using namespace taibai;

// Independent binary16 reference arithmetic. Pure integer implementation:
// operands are decomposed into (sign, integer significand, base-2 exponent),
// combined exactly in 64-bit integers, and rounded once to nearest-even.
// Deliberately shares no code with taibai::fp16, which goes through binary32.
namespace oracle {

struct Dec {
  int sign;      // 0 or 1
  uint64_t mag;  // integer significand (0 for zero)
  int exp;       // value = mag * 2^exp
  bool nan, inf;
};

Dec decode(uint16_t h) {
  Dec d{};
  d.sign = h >> 15;
  const int e = (h >> 10) & 0x1F;
  const uint64_t m = h & 0x3FF;
  if (e == 31) {
    d.nan = m != 0;
    d.inf = m == 0;
    return d;
  }
  if (e == 0) {
    d.mag = m;
    d.exp = -24;
  } else {
    d.mag = m | 0x400;
    d.exp = e - 25;  // (e-15) - 10
  }
  return d;
}

int msb(uint64_t v) {
  int p = -1;
  while (v) {
    v >>= 1;
    p++;
  }
  return p;
}

// Rounds sign * mag * 2^exp to the nearest binary16, ties to even.
uint16_t round_half(int sign, uint64_t mag, int exp) {
  const uint16_t s = static_cast<uint16_t>(sign << 15);
  if (mag == 0) return s;
  int p = msb(mag);
  int value_exp = p + exp;
  uint64_t kept;
  if (value_exp >= -14) {
    const int drop = p - 10;
    if (drop <= 0) {
      kept = mag << -drop;
    } else {
      kept = mag >> drop;
      const uint64_t rem = mag & ((1ull << drop) - 1);
      const uint64_t half = 1ull << (drop - 1);
      if (rem > half || (rem == half && (kept & 1))) kept++;
      if (kept == 0x800) {  // carry into the next binade
        kept = 0x400;
        value_exp++;
      }
    }
    if (value_exp > 15) return s | 0x7C00;
    return s | static_cast<uint16_t>((value_exp + 15) << 10) |
           static_cast<uint16_t>(kept & 0x3FF);
  }
  // Subnormal target: align to units of 2^-24.
  const int drop = -24 - exp;
  if (drop <= 0) {
    kept = mag << -drop;
  } else {
    if (drop > 63) return s;
    kept = mag >> drop;
    const uint64_t rem = mag & ((1ull << drop) - 1);
    const uint64_t half = 1ull << (drop - 1);
    if (rem > half || (rem == half && (kept & 1))) kept++;
  }
  // kept == 0x400 lands exactly on the minimum normal encoding.
  return s | static_cast<uint16_t>(kept);
}

uint16_t add(uint16_t a, uint16_t b) {
  const Dec da = decode(a), db = decode(b);
  if (da.nan || db.nan) return 0x7E00;
  if (da.inf && db.inf) return da.sign == db.sign ? a : 0x7E00;
  if (da.inf) return a;
  if (db.inf) return b;
  if (da.mag == 0 && db.mag == 0)
    return (da.sign && db.sign) ? 0x8000 : 0x0000;
  // Every finite binary16 is an integer multiple of 2^-24.
  const int64_t ia = (da.sign ? -1 : 1) *
                     static_cast<int64_t>(da.mag << (da.exp + 24));
  const int64_t ib = (db.sign ? -1 : 1) *
                     static_cast<int64_t>(db.mag << (db.exp + 24));
  const int64_t sum = ia + ib;
  if (sum == 0) return 0x0000;  // exact cancellation gives +0 under RNE
  return round_half(sum < 0 ? 1 : 0,
                    static_cast<uint64_t>(sum < 0 ? -sum : sum), -24);
}

uint16_t sub(uint16_t a, uint16_t b) {
  return add(a, static_cast<uint16_t>(b ^ 0x8000));
}

uint16_t mul(uint16_t a, uint16_t b) {
  const Dec da = decode(a), db = decode(b);
  if (da.nan || db.nan) return 0x7E00;
  const int sign = da.sign ^ db.sign;
  if (da.inf || db.inf) {
    if ((da.inf && db.mag == 0 && !db.inf) || (db.inf && da.mag == 0 && !da.inf))
      return 0x7E00;
    return static_cast<uint16_t>((sign << 15) | 0x7C00);
  }
  return round_half(sign, da.mag * db.mag, da.exp + db.exp);
}

}  // namespace oracle

namespace {
uint16_t F(float f) { return fp16::from_float(f); }
}

TEST_CASE("fp16 conversion basics") {
  CHECK(F(0.0f) == 0x0000);
  CHECK(F(-0.0f) == 0x8000);
  CHECK(F(1.0f) == 0x3C00);
  CHECK(F(1.5f) == 0x3E00);
  CHECK(F(2.25f) == 0x4080);
  CHECK(F(3.75f) == 0x4380);
  CHECK(F(65504.0f) == 0x7BFF);
  CHECK(F(65519.9f) == 0x7BFF);
  CHECK(F(65520.0f) == 0x7C00);  // ties-to-even overflows to inf
  CHECK(F(1e10f) == 0x7C00);
  CHECK(F(-1e10f) == 0xFC00);
  // Smallest subnormal and the rounding boundary around it.
  CHECK(F(5.9604645e-8f) == 0x0001);          // 2^-24
  CHECK(F(2.9802322e-8f) == 0x0000);          // 2^-25 ties to 0
  CHECK(F(2.9802326e-8f) == 0x0001);          // just above the tie
  CHECK(fp16::to_float(0x0001) == doctest::Approx(5.9604645e-8).epsilon(1e-12));
  CHECK(fp16::to_float(0x3C00) == 1.0f);
  CHECK(fp16::to_float(0x7BFF) == 65504.0f);
  // Round trip over every finite bit pattern.
  for (uint32_t h = 0; h < 0x10000; h++) {
    if (!fp16::is_finite(static_cast<uint16_t>(h))) continue;
    CHECK(F(fp16::to_float(static_cast<uint16_t>(h))) == h);
  }
}

TEST_CASE("fp16 arithmetic spec values") {
  CHECK(fp16::add(F(1.5f), F(2.25f)) == F(3.75f));  // exact in binary16
  CHECK(fp16::add(F(65504.0f), F(16.0f)) == fp16::kPosInf);
  CHECK(fp16::add(F(65504.0f), F(8.0f)) == F(65504.0f));
  CHECK(fp16::mul(F(0.5f), F(4.0f)) == F(2.0f));
  CHECK(fp16::diff_step(F(4.0f), F(0.5f), F(0.0f)) == F(2.0f));
  CHECK(fp16::diff_step(F(0.0f), F(123.0f), F(1.0f)) == F(1.0f));
  // v=0.9, tau=1.0, c=0.2: two roundings, mul first then add.
  const uint16_t got = fp16::diff_step(F(0.9f), F(1.0f), F(0.2f));
  const uint16_t want = oracle::add(oracle::mul(F(1.0f), F(0.9f)), F(0.2f));
  CHECK(got == want);
  CHECK(got == 0x3C66);  // frozen: binary16 nearest to 1.0998535...
}

TEST_CASE("fp16 special values") {
  const uint16_t nan = fp16::kQuietNaN, inf = fp16::kPosInf;
  CHECK(fp16::add(nan, F(1.0f)) == nan);
  CHECK(fp16::add(inf, F(1.0f)) == inf);
  CHECK(fp16::add(inf, fp16::kNegInf) == nan);
  CHECK(fp16::mul(inf, F(0.0f)) == nan);
  CHECK(fp16::mul(inf, F(-2.0f)) == fp16::kNegInf);
  CHECK(fp16::add(F(0.0f), F(-0.0f)) == 0x0000);
  CHECK(fp16::add(F(-0.0f), F(-0.0f)) == 0x8000);
  CHECK(fp16::eq(0x0000, 0x8000));  // -0 == +0
  CHECK_FALSE(fp16::eq(nan, nan));
  CHECK(fp16::ne(nan, nan));
  CHECK_FALSE(fp16::lt(nan, F(1.0f)));
  CHECK_FALSE(fp16::ge(nan, F(1.0f)));
  CHECK(fp16::lt(F(-1.0f), F(1.0f)));
  CHECK(fp16::ge(F(1.0f), F(1.0f)));
}

TEST_CASE("fp16 matches the independent integer reference") {
  std::mt19937 rng(12345);
  std::uniform_int_distribution<uint32_t> bits(0, 0xFFFF);
  for (int i = 0; i < 200000; i++) {
    const uint16_t a = static_cast<uint16_t>(bits(rng));
    const uint16_t b = static_cast<uint16_t>(bits(rng));
    {
      const uint16_t got = fp16::add(a, b), want = oracle::add(a, b);
      if (got != want) {
        CAPTURE(a);
        CAPTURE(b);
        REQUIRE(got == want);
      }
    }
    {
      const uint16_t got = fp16::sub(a, b), want = oracle::sub(a, b);
      if (got != want) {
        CAPTURE(a);
        CAPTURE(b);
        REQUIRE(got == want);
      }
    }
    {
      const uint16_t got = fp16::mul(a, b), want = oracle::mul(a, b);
      if (got != want) {
        CAPTURE(a);
        CAPTURE(b);
        REQUIRE(got == want);
      }
    }
  }
}

TEST_CASE("fp16 exhaustive one-operand sweeps against the reference") {
  // Every bit pattern against a few fixed operands, covering binade
  // boundaries, subnormals and specials on at least one side.
  const uint16_t fixed[] = {0x0000, 0x8000, 0x0001, 0x03FF, 0x0400, 0x3C00,
                            0xBC00, 0x7BFF, 0x7C00, 0xFC00, 0x7E00, 0x3266};
  for (uint32_t ai = 0; ai < 0x10000; ai++) {
    const uint16_t a = static_cast<uint16_t>(ai);
    for (const uint16_t b : fixed) {
      REQUIRE(fp16::add(a, b) == oracle::add(a, b));
      REQUIRE(fp16::mul(a, b) == oracle::mul(a, b));
    }
  }
}
