#pragma once

#include <cstdint>
#include <random>

#include "stf/types.hpp"

namespace stf {

/// Seeded RNG used everywhere determinism matters. Thin wrapper so all
/// draws go through one engine type regardless of platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    std::int64_t uniform_int(std::int64_t n) {  // in [0, n)
        return std::uniform_int_distribution<std::int64_t>(0, n - 1)(engine_);
    }
    Vec3 uniform_vec3(double lo = 0.0, double hi = 1.0) {
        double x = uniform(lo, hi), y = uniform(lo, hi), z = uniform(lo, hi);
        return {x, y, z};
    }
    Vec3 in_box(const Aabb& box) {
        Vec3 u = uniform_vec3();
        return box.lo + u.cwiseProduct(box.extent());
    }
    std::uint64_t raw() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace stf
