#include "epf/nn/tensor.hpp"

#include <numeric>
#include <unordered_set>

#include "epf/error.hpp"

namespace epf::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " x ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    if (nn::numel(shape) != values.size()) {
        throw ShapeError("tensor of shape " + shape_string(shape) + " given " +
                         std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    Tensor t = constant(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
}

Tensor Tensor::zeros(Shape shape) {
    const auto n = nn::numel(shape);
    return constant(std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t Tensor::dim(int axis) const {
    const int r = static_cast<int>(rank());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw ShapeError("axis out of range for " + shape_string(shape()));
    return node_->shape[static_cast<std::size_t>(a)];
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    return node_->value.front();
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(const std::vector<double>&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& p : parents) any = any || p.requires_grad();
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(parents.size());
            for (auto& p : parents) node->parents.push_back(p.node());
            node->backward = std::move(backward_fn);
        }
    }
    return Tensor(std::move(node));
}

void backward(const Tensor& scalar_loss) {
    if (scalar_loss.numel() != 1) throw ShapeError("backward() needs a scalar loss");
    Node* root = scalar_loss.node().get();
    if (!root->requires_grad) return;

    // Iterative post-order DFS; the reversed order is a valid topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward) continue;
        node->ensure_grad();
        for (auto& p : node->parents) {
            if (p->requires_grad) p->ensure_grad();
        }
        node->backward(node->grad);
    }
    // Interior nodes are no longer needed; unlinking them frees the graph
    // iteratively instead of through a deep chain of destructors.
    for (Node* node : order) {
        if (node->backward) {
            node->backward = nullptr;
            node->parents.clear();
        }
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace epf::nn
