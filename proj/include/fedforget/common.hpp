#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fedforget {

/// Operands of a parameter-space operation disagree on layout.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN/Inf or received non-finite input.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument outside of shape handling (empty sets, bad sizes...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Rng = std::mt19937_64;

// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream tags keep the per-purpose RNG streams of one scenario apart.
enum class Stream : std::uint64_t {
  kTask = 1,
  kTrigger,
  kPartition,
  kInit,
  kSelection,
  kLocal,
  kAdversary,
  kUnlearn,
  kNoise,
};

/// Derives an independent seed from a base seed and up to three counters.
constexpr std::uint64_t derive_seed(std::uint64_t base, Stream stream,
                                    std::uint64_t a = 0, std::uint64_t b = 0,
                                    std::uint64_t c = 0) noexcept {
  std::uint64_t h = mix64(base ^ 0x5851f42d4c957f2dULL);
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  h = mix64(h ^ a);
  h = mix64(h ^ (b * 0x9e3779b97f4a7c15ULL));
  h = mix64(h ^ (c * 0xc2b2ae3d27d4eb4fULL));
  return h;
}

inline Rng make_rng(std::uint64_t base, Stream stream, std::uint64_t a = 0,
                    std::uint64_t b = 0, std::uint64_t c = 0) {
  return Rng(derive_seed(base, stream, a, b, c));
}

}  // namespace fedforget
