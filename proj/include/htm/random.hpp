#pragma once

#include <cstdint>
#include <random>

namespace htm {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix_seed(mix_seed(base ^ mix_seed(stream)) + index);
}

namespace seed_stream {
inline constexpr std::uint64_t kContext = 1;
inline constexpr std::uint64_t kTrajectory = 2;
inline constexpr std::uint64_t kInitialState = 3;
inline constexpr std::uint64_t kTask = 4;
inline constexpr std::uint64_t kTraining = 5;
inline constexpr std::uint64_t kHallucination = 6;
inline constexpr std::uint64_t kValidation = 7;
inline constexpr std::uint64_t kInit = 8;
}  // namespace seed_stream

}  // namespace htm
