#pragma once

#include <cstdint>

// IEEE-754 binary16 arithmetic on raw uint16_t bit patterns.
//
// Operands are widened to binary32, the operation is performed once, and the
// result is rounded back to binary16 with round-to-nearest-even. Because
// binary32 carries 24 significand bits (= 2*11 + 2), a single widened
// add/sub/mul of binary16 operands stays correctly rounded after the final
// conversion, so every operation here is the bit-exact binary16 result.
//
// NaN results are canonicalized to the quiet NaN 0x7E00 so that traces are
// identical across hosts regardless of hardware NaN payload behavior.

namespace taibai::fp16 {

inline constexpr uint16_t kQuietNaN = 0x7E00;
inline constexpr uint16_t kPosInf = 0x7C00;
inline constexpr uint16_t kNegInf = 0xFC00;
inline constexpr uint16_t kOne = 0x3C00;

uint16_t from_float(float f);
float to_float(uint16_t h);

inline bool is_nan(uint16_t h) {
  return (h & 0x7C00u) == 0x7C00u && (h & 0x03FFu) != 0;
}
inline bool is_inf(uint16_t h) { return (h & 0x7FFFu) == 0x7C00u; }
inline bool is_finite(uint16_t h) { return (h & 0x7C00u) != 0x7C00u; }

uint16_t add(uint16_t a, uint16_t b);
uint16_t sub(uint16_t a, uint16_t b);
uint16_t mul(uint16_t a, uint16_t b);
inline uint16_t neg(uint16_t a) { return a ^ 0x8000u; }

// IEEE comparisons: NaN is unordered (eq/lt/ge false, ne true); -0 == +0.
bool eq(uint16_t a, uint16_t b);
bool lt(uint16_t a, uint16_t b);
bool ge(uint16_t a, uint16_t b);
inline bool ne(uint16_t a, uint16_t b) { return !eq(a, b); }

// One-step first-order recurrence v' = tau*v + c, rounded per operation:
// round(tau*v) first, then round(+c). Never fused.
inline uint16_t diff_step(uint16_t v, uint16_t tau, uint16_t c) {
  return add(mul(tau, v), c);
}

}  // namespace taibai::fp16
