#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace leo {

using Seed = std::uint64_t;

/// SplitMix64 finalizer; a bijective 64-bit mix.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Child seed for the `index`-th draw under `parent`.
///
/// child = splitmix64(parent ^ splitmix64(index + 0x9E3779B97F4A7C15)).
/// Every parallel fan-out in the library derives per-item seeds this way, so
/// results never depend on worker count or scheduling.
Seed split_seed(Seed parent, std::uint64_t index) noexcept;

/// Seed for a named namespace ("train", "test", "mc", ...). Distinct names give
/// disjoint streams, which is how train/test separation is enforced.
Seed namespace_seed(Seed parent, std::string_view name) noexcept;

/// The engine used throughout; deterministic given its seed.
using Engine = std::mt19937_64;

inline Engine make_engine(Seed seed) { return Engine(splitmix64(seed)); }

}  // namespace leo
