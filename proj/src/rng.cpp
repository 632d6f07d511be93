#include "vcsr/rng.hpp"

#include <stdexcept>

namespace vcsr {

int64_t Rng::below(int64_t n) {
    if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
    // rejection sampling, no modulo bias
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: k out of range");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
        int64_t j = below(n - i);
        out.push_back(pool[j]);
        std::swap(pool[j], pool[n - 1 - i]);
    }
    return out;
}

}  // namespace vcsr
