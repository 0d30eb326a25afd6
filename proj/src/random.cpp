#include "ivgen/random.hpp"

namespace ivgen {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

Tensor standard_normal(const Shape& shape, Rng& rng) {
  Tensor out(shape);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.values()) v = normal(rng);
  return out;
}

}  // namespace ivgen
