#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace rme {

// Sentinel for "no value" / null reference (the algorithms' bottom symbol).
inline constexpr int64_t kNil = -1;

// A word's content: a scalar or a small tuple (LOCK_STATUS holds a triple).
struct Value {
  std::array<int64_t, 3> f{0, 0, 0};
  uint8_t arity = 1;

  static Value scalar(int64_t v) { return Value{{v, 0, 0}, 1}; }
  static Value tuple(int64_t a, int64_t b, int64_t c) { return Value{{a, b, c}, 3}; }

  int64_t s() const { return f[0]; }

  bool operator==(const Value&) const = default;

  std::string str() const;
};

// Bits needed to encode a nonnegative integer (nil costs one extra symbol).
int bits_for(int64_t v);

// Total bits needed to encode a value, summing its fields.
int encoded_bits(const Value& v);

}  // namespace rme
