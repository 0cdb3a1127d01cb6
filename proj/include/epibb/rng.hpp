#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <utility>

namespace epibb {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Sampling helpers on top of mt19937_64. The engine's output sequence is
// fixed by the standard; distributions are hand-rolled so results do not
// depend on the C++ library implementation.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer draw in [0, n) by rejection.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = rng();
    while (v >= limit) {
        v = rng();
    }
    return v % n;
}

inline double normal01(std::mt19937_64& rng) {
    // Box-Muller; u1 kept away from zero.
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline double lognormal(std::mt19937_64& rng, double median, double sigma) {
    return median * std::exp(sigma * normal01(rng));
}

// Purpose-scoped RNG streams derived from one scenario seed. Streams are
// created lazily but their seeds depend only on (seed, process, purpose),
// so instrumenting one stream never perturbs another.
class RngStreams {
public:
    enum class Purpose : std::uint64_t {
        Loss = 1,
        Target = 2,
        Latency = 3,
        TreeGen = 4,
    };

    explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

    std::mt19937_64& stream(int process, Purpose purpose) {
        const auto key = std::pair<int, std::uint64_t>(process, static_cast<std::uint64_t>(purpose));
        auto it = streams_.find(key);
        if (it == streams_.end()) {
            const std::uint64_t s = splitmix64(seed_ ^ splitmix64((static_cast<std::uint64_t>(process) << 8) ^ static_cast<std::uint64_t>(purpose)));
            it = streams_.emplace(key, std::mt19937_64(s)).first;
        }
        return it->second;
    }

private:
    std::uint64_t seed_;
    std::map<std::pair<int, std::uint64_t>, std::mt19937_64> streams_;
};

}  // namespace epibb
