#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bcnn {

using Rng = std::mt19937_64;

/// Independent generator for a named stream under a run seed. Layers,
/// initializers and the shuffler each draw from their own stream so that
/// adding a branch to a network never perturbs the draws of shared layers.
Rng make_rng(std::uint64_t seed, std::string_view stream);

}  // namespace bcnn
