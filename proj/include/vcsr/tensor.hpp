#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vcsr {

using Shape = std::vector<int>;

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One record in the computation graph. Creation order (id) is a topological
// order: every input is created before its consumers, so a single reverse
// sweep over ids visits each node exactly once.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily, same extent as value
    bool requires_grad = false;
    uint64_t id = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Accumulates d(loss)/d(input) into the inputs' grad buffers given this
    // node's grad buffer. Only set on non-leaf nodes that require grad.
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

uint64_t next_node_id();

}  // namespace detail

// Dense row-major f64 tensor with optional reverse-mode autodiff tracking.
// Value semantics on the handle; the underlying node is shared.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(int i) const { return node_->shape[i]; }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

    std::span<const double> values() const { return node_->value; }
    std::span<const double> grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    bool requires_grad() const { return node_->requires_grad; }

    double value() const;          // scalar tensors only
    double at(int64_t i) const { return node_->value[i]; }
    double at(int r, int c) const { return node_->value[static_cast<int64_t>(r) * dim(1) + c]; }

    // Leaf mutation, for parameter updates and finite differencing. Must not
    // be called between a forward pass and its backward().
    std::vector<double>& mutable_values();
    void zero_grad();

    // Runs reverse-mode accumulation from this scalar. Grads add into any
    // requires_grad leaf reachable from it.
    void backward() const;

    void check_finite(const char* what) const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

namespace detail {

// Builders used by ops.cpp and by tests that need an op with a custom
// (possibly wrong) backward.
Tensor make_op(Shape shape, std::vector<double> value, const char* name,
               std::vector<Tensor> inputs, std::function<void(Node&)> backward);

}  // namespace detail

}  // namespace vcsr
