#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vcsr/rng.hpp"
#include "vcsr/tensor.hpp"

namespace vcsr {

enum class Init {
    kXavier,      // U(-a, a), a = sqrt(6 / (fan_in + fan_out)); matrices only
    kZeros,       // biases
    kOnes,        // layer-norm gains
    kNormal002,   // embedding tables, N(0, 0.02)
};

// Ordered registry of named trainable leaves. Registration order is the
// serialization and optimizer-state order, so it must be deterministic.
class ParamStore {
public:
    Tensor make(const std::string& name, Shape shape, Init init, Rng& rng);

    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Tensor get(const std::string& name) const;

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    int64_t total_values() const;
    void zero_grads();

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::unordered_map<std::string, size_t> index_;
};

}  // namespace vcsr
