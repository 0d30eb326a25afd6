#pragma once

#include <cstdint>
#include <random>

#include "ivgen/tensor.hpp"

namespace ivgen {

using Rng = std::mt19937_64;

// Independent deterministic stream for (seed, stream id).
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

Tensor standard_normal(const Shape& shape, Rng& rng);

}  // namespace ivgen
