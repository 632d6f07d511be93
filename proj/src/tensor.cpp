#include "vcsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace vcsr {

int64_t numel_of(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor extents must be positive");
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

namespace detail {

uint64_t next_node_id() {
    static std::atomic<uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

Tensor make_op(Shape shape, std::vector<double> value, const char* name,
               std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (static_cast<int64_t>(n->value.size()) != numel_of(n->shape))
        throw std::invalid_argument(std::string(name) + ": value size does not match shape");
    n->op = name;
    n->id = next_node_id();
    bool needs = false;
    for (const auto& t : inputs) {
        if (!t.defined()) throw std::invalid_argument(std::string(name) + ": undefined input");
        needs = needs || t.node()->requires_grad;
    }
    if (needs) {
        n->requires_grad = true;
        n->inputs.reserve(inputs.size());
        for (auto& t : inputs) n->inputs.push_back(t.node());
        n->backward = std::move(backward);
    }
    return Tensor(std::move(n));
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return from_data(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    int64_t n = numel_of(shape);
    return from_data(std::move(shape), std::vector<double>(n, v), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    int64_t count = numel_of(n->shape);
    if (data.empty()) data.assign(count, 0.0);
    if (static_cast<int64_t>(data.size()) != count)
        throw std::invalid_argument("from_data: size mismatch, shape " + shape_str(n->shape) +
                                    " expects " + std::to_string(count) + " values, got " +
                                    std::to_string(data.size()));
    for (double v : data) {
        if (!std::isfinite(v)) throw std::invalid_argument("from_data: non-finite value");
    }
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->id = detail::next_node_id();
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data(Shape{}, std::vector<double>{v}, requires_grad);
}

double Tensor::value() const {
    if (numel() != 1) throw std::invalid_argument("Tensor::value: not a scalar");
    return node_->value[0];
}

std::vector<double>& Tensor::mutable_values() { return node_->value; }

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::check_finite(const char* what) const {
    for (double v : node_->value) {
        if (!std::isfinite(v))
            throw std::runtime_error(std::string(what) + ": non-finite value in tensor " +
                                     shape_str(node_->shape) + " (op " + node_->op + ")");
    }
}

void Tensor::backward() const {
    if (!defined() || numel() != 1)
        throw std::invalid_argument("backward: loss must be a defined scalar tensor");
    if (!node_->requires_grad) return;

    // Collect the reachable requires_grad subgraph, then replay in reverse
    // creation order (a valid topological order by construction).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<detail::Node*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
        detail::Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& in : n->inputs) {
            if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const detail::Node* a, const detail::Node* b) { return a->id > b->id; });

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (detail::Node* n : order) {
        if (n->backward) {
            for (const auto& in : n->inputs)
                if (in->requires_grad) in->ensure_grad();
            n->backward(*n);
        }
    }
}

}  // namespace vcsr
