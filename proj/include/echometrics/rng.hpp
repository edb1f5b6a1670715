#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace echometrics {

using Engine = std::mt19937_64;

// Derives an independent seed for a named substream of a master seed, so
// that results do not depend on the order in which streams are consumed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index = 0);

inline Engine make_stream(std::uint64_t master, std::string_view label,
                          std::uint64_t index = 0) {
  return Engine{derive_seed(master, label, index)};
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace echometrics
