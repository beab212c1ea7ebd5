#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace tbg {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seeded PRNG with portable output. The engine is mt19937_64 (output fully
// specified by the standard); uniform/gaussian transforms are done by hand
// rather than through std distributions, whose output is
// implementation-defined.
class SeededRng {
  public:
    static constexpr const char* kAlgorithm = "mt19937_64";

    explicit SeededRng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1), 53-bit resolution
    double next_unit() { return (next_u64() >> 11) * 0x1.0p-53; }

    // N(0, 1) via Box-Muller
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = next_unit();
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Independent stream derived from the original seed and a stream id,
    // regardless of how much this instance has been consumed.
    SeededRng fork(uint64_t stream_id) const {
        return SeededRng(splitmix64(seed_ ^ splitmix64(stream_id ^ 0xa0761d6478bd642fULL)));
    }

  private:
    uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace tbg
