#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <concepts>
#include <type_traits>

namespace voteflow {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Platform-independent hash of a sequence of strings and integers.
///
/// FNV-1a over a length-prefixed encoding (so ("ab","c") and ("a","bc")
/// differ), finalized through splitmix64. Used for every seed and
/// idempotency key, so the value must never depend on std::hash.
class StableHasher {
 public:
  StableHasher& add(std::string_view bytes) noexcept {
    add_raw(static_cast<std::uint64_t>(bytes.size()));
    for (unsigned char c : bytes) mix(c);
    return *this;
  }
  StableHasher& add(std::uint64_t value) noexcept {
    mix(0xff);
    add_raw(value);
    return *this;
  }
  StableHasher& add(std::int64_t value) noexcept { return add(static_cast<std::uint64_t>(value)); }
  StableHasher& add(int value) noexcept { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(value))); }
  template <std::unsigned_integral T>
    requires(!std::is_same_v<T, std::uint64_t> && !std::is_same_v<T, bool>)
  StableHasher& add(T value) noexcept {
    return add(static_cast<std::uint64_t>(value));
  }
  StableHasher& add(const char* s) noexcept { return add(std::string_view{s}); }
  StableHasher& add(const std::string& s) noexcept { return add(std::string_view{s}); }

  [[nodiscard]] std::uint64_t digest() const noexcept { return splitmix64(state_); }

 private:
  void mix(unsigned char c) noexcept {
    state_ ^= c;
    state_ *= 0x100000001b3ULL;
  }
  void add_raw(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>((v >> (8 * i)) & 0xffU));
  }

  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

template <class... Parts>
[[nodiscard]] std::uint64_t stable_hash(const Parts&... parts) noexcept {
  StableHasher h;
  (h.add(parts), ...);
  return h.digest();
}

/// splitmix64 stream; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). bound must be nonzero.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t state_;
};

[[nodiscard]] inline std::string to_hex(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace voteflow
