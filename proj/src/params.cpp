#include "vcsr/params.hpp"

#include <cmath>
#include <stdexcept>

namespace vcsr {

Tensor ParamStore::make(const std::string& name, Shape shape, Init init, Rng& rng) {
    if (has(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    const int64_t n = numel_of(shape);
    std::vector<double> data(n, 0.0);
    switch (init) {
        case Init::kZeros:
            break;
        case Init::kOnes:
            data.assign(n, 1.0);
            break;
        case Init::kXavier: {
            if (shape.size() != 2)
                throw std::invalid_argument("ParamStore: xavier init expects a matrix for " + name);
            const double a = std::sqrt(6.0 / (shape[0] + shape[1]));
            for (auto& v : data) v = (2.0 * rng.uniform() - 1.0) * a;
            break;
        }
        case Init::kNormal002:
            for (auto& v : data) v = 0.02 * rng.normal();
            break;
    }
    Tensor t = Tensor::from_data(std::move(shape), std::move(data), /*requires_grad=*/true);
    index_[name] = entries_.size();
    entries_.emplace_back(name, t);
    return t;
}

Tensor ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return entries_[it->second].second;
}

int64_t ParamStore::total_values() const {
    int64_t n = 0;
    for (const auto& [_, t] : entries_) n += t.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [_, t] : entries_) t.zero_grad();
}

}  // namespace vcsr
