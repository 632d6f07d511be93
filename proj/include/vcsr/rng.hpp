#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace vcsr {

// Deterministic random source. All distributions are hand-derived from the
// mt19937_64 bit stream (the std distribution objects are
// implementation-defined and would break cross-compiler reproducibility).
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed), base_seed_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1); never returns 0 so log() is safe
    double uniform_open() {
        double u = uniform();
        return u > 0.0 ? u : 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (one value per call, no cached state)
    double normal() {
        double u1 = uniform_open();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643 * u2);
    }

    double gumbel() { return -std::log(-std::log(uniform_open())); }

    // uniform integer in [0, n)
    int64_t below(int64_t n);

    std::vector<double> normal_vec(size_t n, double scale = 1.0) {
        std::vector<double> v(n);
        for (auto& x : v) x = scale * normal();
        return v;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(static_cast<int64_t>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices drawn uniformly from [0, n)
    std::vector<int> sample_without_replacement(int n, int k);

    // Independent child stream derived from the seed this Rng was built with;
    // used for per-sample streams so results do not depend on processing order.
    Rng derive(uint64_t a, uint64_t b = 0, uint64_t c = 0) const {
        return Rng(mix(mix(mix(base_seed_, a), b), c));
    }

private:
    static uint64_t mix(uint64_t h, uint64_t v) {
        uint64_t z = h + 0x9e3779b97f4a7c15ull + v * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    uint64_t base_seed_;
};

}  // namespace vcsr
