#pragma once

#include <cmath>
#include <cstdint>

namespace dmfuse {

/// SplitMix64 (Steele, Lea, Flood 2014). Chosen over the platform engines
/// because the algorithm is fully specified by these three constants, so
/// streams are reproducible across compilers and languages.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1): 53 mantissa bits.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]: safe under log().
    double next_uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; both branch values are consumed.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform_pos();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    /// Derive an independent stream; used to give each artifact (image,
    /// noise field, init) its own seed from one master seed.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        SplitMix64 g(seed ^ (0xA0761D6478BD642FULL * (stream + 1)));
        return g.next_u64();
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dmfuse
