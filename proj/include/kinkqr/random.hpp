#pragma once

#include <cstdint>
#include <random>

namespace kinkqr {

std::uint64_t splitmix64(std::uint64_t x);

// Independent generator for (seed, stream); a replicate's draws depend only
// on its own stream index, never on execution order.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

// Child seed for nested streams, e.g. Monte Carlo replicate r.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace kinkqr
