#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dtsl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One vertex of the autograd graph. The backward closure reads `grad` of the
// node it belongs to and accumulates into the grads of `inputs`.
struct Node {
    Shape shape;
    std::shared_ptr<std::vector<double>> data;
    bool requires_grad = false;
    std::vector<double> grad;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;
    const char* op = "leaf";

    void ensure_grad();
};

}  // namespace detail

// Dense row-major float64 array with optional gradient tracking.
//
// Copies are shallow: two Tensor handles may refer to the same node, like a
// reference-counted framework tensor. Use clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim() const { return shape().size(); }
    std::size_t size(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    // Only leaves may be written (optimizer steps, EMA blending).
    std::span<double> mutable_data();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    // Same values, no history, never requires grad.
    Tensor detach() const;
    Tensor clone(bool requires_grad) const;

    const char* op_name() const;

    // Internal: used by op implementations.
    static Tensor from_node(std::shared_ptr<detail::Node> node);
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// Reverse-topological record of the nodes reachable from a root that take
// part in differentiation; every node appears after all of its inputs.
struct Tape {
    std::vector<std::shared_ptr<detail::Node>> order;
};

Tape record_tape(const Tensor& root);

// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
// requires_grad tensor reachable from `loss`. Leaf grads accumulate across
// calls until zero_grad().
void backward(const Tensor& loss);

namespace detail {

// Builds a non-leaf result. `fn` is only attached when some input requires grad.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, std::function<void(Node&)> fn,
                   const char* op);

}  // namespace detail

}  // namespace dtsl
