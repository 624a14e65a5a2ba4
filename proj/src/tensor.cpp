#include "dtsl/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace dtsl {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void detail::Node::ensure_grad() {
    if (grad.empty()) grad.assign(data->size(), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("Tensor: zero-sized dimension in " + shape_to_string(shape));
    }
    if (shape_numel(shape) != values.size()) {
        throw std::invalid_argument("Tensor: shape " + shape_to_string(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    }
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->data = std::make_shared<std::vector<double>>(std::move(values));
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

static const detail::Node& checked(const std::shared_ptr<detail::Node>& n) {
    if (!n) throw std::logic_error("Tensor: use of undefined tensor");
    return *n;
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::size(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) throw std::out_of_range("Tensor::size: axis out of range");
    return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).data->size(); }

std::span<const double> Tensor::data() const { return *checked(node_).data; }

std::span<double> Tensor::mutable_data() {
    checked(node_);
    if (!node_->inputs.empty()) throw std::logic_error("Tensor::mutable_data: only leaf tensors are writable");
    return *node_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(numel()) + " elements");
    return data()[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.size()) throw std::invalid_argument("Tensor::at: rank mismatch");
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= s[axis]) throw std::out_of_range("Tensor::at: index out of range");
        flat = flat * s[axis] + i;
        ++axis;
    }
    return data()[flat];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::is_leaf() const { return checked(node_).inputs.empty(); }
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw std::logic_error("Tensor::grad: no gradient populated");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    checked(node_);
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    checked(node_);
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    const detail::Node& src = checked(node_);
    auto n = std::make_shared<detail::Node>();
    n->shape = src.shape;
    n->data = src.data;
    n->op = "detach";
    return from_node(std::move(n));
}

Tensor Tensor::clone(bool requires_grad) const {
    const detail::Node& src = checked(node_);
    return Tensor(src.shape, *src.data, requires_grad);
}

const char* Tensor::op_name() const { return checked(node_).op; }

Tape record_tape(const Tensor& root) {
    Tape tape;
    if (!root.defined() || !root.requires_grad()) return tape;
    // Iterative post-order DFS; a node is emitted once all inputs are emitted.
    std::unordered_set<const detail::Node*> visited;
    std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            const auto& in = node->inputs[next++];
            if (in->requires_grad && visited.insert(in.get()).second) stack.emplace_back(in, 0);
        } else {
            tape.order.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
    if (loss.numel() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_to_string(loss.shape()));
    }
    if (!loss.requires_grad()) return;
    Tape tape = record_tape(loss);
    for (auto& n : tape.order) {
        if (n->inputs.empty()) {
            n->ensure_grad();
        } else {
            n->grad.assign(n->data->size(), 0.0);
        }
    }
    tape.order.back()->grad[0] += 1.0;
    for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
        detail::Node& n = **it;
        if (n.backward) n.backward(n);
    }
}

Tensor detail::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                           std::function<void(Node&)> fn, const char* op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::make_shared<std::vector<double>>(std::move(values));
    n->op = op;
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (any) {
        n->requires_grad = true;
        n->inputs.reserve(inputs.size());
        for (auto& t : inputs) n->inputs.push_back(t.node());
        n->backward = std::move(fn);
    }
    return Tensor::from_node(std::move(n));
}

}  // namespace dtsl
