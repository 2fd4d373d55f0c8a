#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace c2fpl {

using Rng = std::mt19937_64;

// Stage-local seed derived from the run seed by fixed hashing, so one
// --seed value reproduces every stage of a run.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage,
                          std::uint64_t index = 0);

// Uniform in [0, 1) from the top 53 bits of one draw.
double uniform01(Rng& rng);

// Standard normal via Box-Muller; consumes two draws.
double standard_normal(Rng& rng);

}  // namespace c2fpl
