#pragma once

#include <cstdint>
#include <random>

namespace wigprobe {

/// Independent generator for stream `stream` under master seed `master`.
/// Workers, bootstrap replicas and curve points each take their own stream.
inline std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

/// Derived seed for a sub-task, so nested stages do not share streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  auto rng = make_rng(master, stream);
  return rng();
}

}  // namespace wigprobe
