#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mglm/common.hpp"

namespace mglm {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable derivation of stream seeds from (seed, step, lane, ...).
inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0) {
    uint64_t h = splitmix64(a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    h = splitmix64(h ^ d);
    return h;
}

// Deterministic RNG with hand-rolled distributions so that sampled values do
// not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, n). Rejection sampling keeps the draw unbiased.
    uint64_t uniform_u64(uint64_t n) {
        if (n == 0) throw NumericError("Rng::uniform_u64: n must be positive");
        const uint64_t threshold = (0 - n) % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x < threshold);
        return x % n;
    }

    size_t uniform_index(size_t n) { return static_cast<size_t>(uniform_u64(n)); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller without caching, so the state is fully captured by the engine.
    double normal(double mean = 0.0, double stddev = 1.0) {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform_real();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        return mean + stddev * r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // mt19937_64 streams its state as decimal words.
    std::string state_string() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (is.fail()) throw DataError("Rng::set_state: malformed state string");
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace mglm
