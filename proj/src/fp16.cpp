#include "taibai/fp16.hpp"

#include <bit>

namespace taibai::fp16 {

namespace {
// 65520.0f: the smallest magnitude that rounds to infinity in binary16
// (halfway between 65504 and 2^16; ties-to-even resolves upward).
constexpr uint32_t kOverflowBits = 0x477FF000u;
// 2^-25: halfway between 0 and the smallest binary16 subnormal; ties to 0.
constexpr uint32_t kUnderflowBits = 0x33000000u;
// 2^-14: smallest binary16 normal.
constexpr uint32_t kMinNormalBits = 0x38800000u;
}  // namespace

uint16_t from_float(float f) {
  const uint32_t x = std::bit_cast<uint32_t>(f);
  const uint16_t sign = static_cast<uint16_t>((x >> 16) & 0x8000u);
  const uint32_t mag = x & 0x7FFFFFFFu;

  if (mag > 0x7F800000u) return kQuietNaN;
  if (mag >= kOverflowBits) return sign | 0x7C00u;
  if (mag <= kUnderflowBits) return sign;

  if (mag < kMinNormalBits) {
    // Result is a binary16 subnormal: express the value in units of 2^-24
    // and round the dropped bits to nearest-even.
    const int e = static_cast<int>(mag >> 23) - 127;  // in [-25, -15]
    const uint32_t m = (mag & 0x7FFFFFu) | 0x800000u;
    const int sh = -e - 1;  // in [14, 24]
    uint32_t kept = m >> sh;
    const uint32_t rem = m & ((1u << sh) - 1u);
    const uint32_t half = 1u << (sh - 1);
    if (rem > half || (rem == half && (kept & 1u))) kept++;
    // A carry out of the subnormal range lands exactly on the minimum
    // normal encoding, which is the correct result.
    return sign | static_cast<uint16_t>(kept);
  }

  const int e = static_cast<int>(mag >> 23) - 127;  // in [-14, 15]
  const uint32_t m = mag & 0x7FFFFFu;
  uint16_t h = sign | static_cast<uint16_t>((e + 15) << 10) |
               static_cast<uint16_t>(m >> 13);
  const uint32_t rem = m & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) h++;
  return h;
}

float to_float(uint16_t h) {
  const uint32_t sign = static_cast<uint32_t>(h & 0x8000u) << 16;
  uint32_t exp = (h >> 10) & 0x1Fu;
  uint32_t man = h & 0x3FFu;
  uint32_t bits;
  if (exp == 0) {
    if (man == 0) {
      bits = sign;
    } else {
      int e = 113;  // biased binary32 exponent of 2^-14
      while (!(man & 0x400u)) {
        man <<= 1;
        e--;
      }
      bits = sign | (static_cast<uint32_t>(e) << 23) | ((man & 0x3FFu) << 13);
    }
  } else if (exp == 31) {
    bits = sign | 0x7F800000u | (man << 13);
  } else {
    bits = sign | ((exp + 112u) << 23) | (man << 13);
  }
  return std::bit_cast<float>(bits);
}

uint16_t add(uint16_t a, uint16_t b) {
  if (is_nan(a) || is_nan(b)) return kQuietNaN;
  const float r = to_float(a) + to_float(b);
  if (r != r) return kQuietNaN;  // inf + (-inf)
  return from_float(r);
}

uint16_t sub(uint16_t a, uint16_t b) {
  if (is_nan(a) || is_nan(b)) return kQuietNaN;
  const float r = to_float(a) - to_float(b);
  if (r != r) return kQuietNaN;
  return from_float(r);
}

uint16_t mul(uint16_t a, uint16_t b) {
  if (is_nan(a) || is_nan(b)) return kQuietNaN;
  const float r = to_float(a) * to_float(b);
  if (r != r) return kQuietNaN;  // 0 * inf
  return from_float(r);
}

bool eq(uint16_t a, uint16_t b) {
  if (is_nan(a) || is_nan(b)) return false;
  return to_float(a) == to_float(b);
}

bool lt(uint16_t a, uint16_t b) {
  if (is_nan(a) || is_nan(b)) return false;
  return to_float(a) < to_float(b);
}

bool ge(uint16_t a, uint16_t b) {
  if (is_nan(a) || is_nan(b)) return false;
  return to_float(a) >= to_float(b);
}

}  // namespace taibai::fp16
