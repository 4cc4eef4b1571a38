#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dyadic {

// Seeded generator with explicit transforms.  std::*_distribution is
// implementation-defined, so experiments that promise byte-identical CSV
// output for a given seed roll their own draws on top of mt19937_64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() {
        // 53 random mantissa bits in [0,1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t uniform_index(std::uint64_t n) {
        // modulo bias negligible for desk-scale n
        return eng_() % n;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01(), u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double lognormal(double sigma) { return std::exp(sigma * normal()); }

    bool bernoulli(double p) { return uniform01() < p; }

  private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dyadic
