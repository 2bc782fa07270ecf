#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace rbal {

/// Mixes a master seed with a list of stream coordinates (worker, round, ...)
/// into an independent 64-bit seed. Order of coordinates matters.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords);

/// Seeded 64-bit engine with platform-independent uniform draws.
class Rng {
  public:
    using engine_type = std::mt19937_64;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, bound); bound must be positive.
    std::size_t index(std::size_t bound);

    engine_type& engine() { return engine_; }

  private:
    engine_type engine_;
};

} // namespace rbal
