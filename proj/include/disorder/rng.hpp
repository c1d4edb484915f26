#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace disorder {

// Philox4x32-10 counter-based generator. A draw is a pure function of
// (seed, path_index, domain, counter), so path-level parallelism is
// deterministic no matter how work is scheduled.
namespace philox {

inline uint32_t mul_hi(uint32_t a, uint32_t b) {
    return uint32_t((uint64_t(a) * b) >> 32);
}

inline std::array<uint32_t, 4> block(uint64_t key, uint64_t ctr_hi, uint64_t ctr_lo) {
    constexpr uint32_t kMulA = 0xD2511F53u, kMulB = 0xCD9E8D57u;
    constexpr uint32_t kWeylA = 0x9E3779B9u, kWeylB = 0xBB67AE85u;
    uint32_t x0 = uint32_t(ctr_lo), x1 = uint32_t(ctr_lo >> 32);
    uint32_t x2 = uint32_t(ctr_hi), x3 = uint32_t(ctr_hi >> 32);
    uint32_t k0 = uint32_t(key), k1 = uint32_t(key >> 32);
    for (int round = 0; round < 10; ++round) {
        const uint32_t lo0 = kMulA * x0, hi0 = mul_hi(kMulA, x0);
        const uint32_t lo1 = kMulB * x2, hi1 = mul_hi(kMulB, x2);
        const uint32_t n0 = hi1 ^ x1 ^ k0;
        const uint32_t n1 = lo1;
        const uint32_t n2 = hi0 ^ x3 ^ k1;
        const uint32_t n3 = lo0;
        x0 = n0; x1 = n1; x2 = n2; x3 = n3;
        k0 += kWeylA;
        k1 += kWeylB;
    }
    return {x0, x1, x2, x3};
}

} // namespace philox

// Per-path stream. Domain 0 is indexed by observation step (so the noise a
// path sees does not depend on when alarms fire); domain 1 is a sequential
// stream for regime draws.
class PathRng {
public:
    PathRng(uint64_t seed, uint64_t path_index) : seed_(seed), path_(path_index) {}

    // standard normal tied to a specific observation step
    double normal_at(uint64_t step) const {
        const auto b = philox::block(seed_, (0ull << 56) | path_, step);
        const double u1 = to_open_unit(b[0], b[1]);
        const double u2 = to_unit(b[2], b[3]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double next_uniform() {
        const auto b = philox::block(seed_, (1ull << 56) | path_, aux_ctr_++);
        return to_unit(b[0], b[1]);
    }

    double next_exponential(double rate) {
        const auto b = philox::block(seed_, (1ull << 56) | path_, aux_ctr_++);
        return -std::log(to_open_unit(b[0], b[1])) / rate;
    }

    bool next_bernoulli(double p) { return next_uniform() < p; }

private:
    static double to_unit(uint32_t a, uint32_t b) { // [0, 1)
        const uint64_t v = (uint64_t(a) << 32) | b;
        return double(v >> 11) * 0x1.0p-53;
    }
    static double to_open_unit(uint32_t a, uint32_t b) { // (0, 1]
        return 1.0 - to_unit(a, b);
    }

    uint64_t seed_;
    uint64_t path_;
    uint64_t aux_ctr_ = 0;
};

} // namespace disorder
