// Seeded RNG with self-contained distribution transforms so that streams are
// bit-stable across standard libraries (std::normal_distribution is not).

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mgdun/tensor.hpp"

namespace mgdun {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() {
        return double(gen_() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + int(gen_() % std::uint64_t(hi - lo + 1));
    }

    // Box-Muller; one value per call keeps the stream layout obvious.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    void fill_uniform(Tensor& t, float lo, float hi) {
        for (auto& v : t.values()) v = float(uniform(lo, hi));
    }
    void fill_normal(Tensor& t, float mean, float std) {
        for (auto& v : t.values()) v = float(mean + std * normal());
    }
    // He-uniform: bound sqrt(6 / fan_in), the init used for conv weights.
    void fill_he_uniform(Tensor& t, int fan_in, float gain = 1.0f) {
        const float b = gain * std::sqrt(6.0f / float(fan_in));
        fill_uniform(t, -b, b);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace mgdun
