#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "sawtooth/time_series.hpp"

namespace sawtooth {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Seed splitting rule:
//   stage seed  = mix64(master ^ fnv1a64(stage_name))
//   stream seed = mix64(parent + 0x9e3779b97f4a7c15 * (index + 1))
// Stages and per-sample streams are therefore reproducible in isolation and
// independent of how many threads consume them.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) noexcept;
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept;

TimeSeries standard_normal(std::size_t channels, std::size_t length, Rng& rng);

}  // namespace sawtooth
