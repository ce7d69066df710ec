#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace epf::nn {

using Shape = std::vector<std::size_t>;

[[nodiscard]] std::size_t numel(const Shape& shape);
[[nodiscard]] std::string shape_string(const Shape& shape);

// One vertex of the dynamic computation graph. Interior nodes hold the
// closure that pushes their gradient into their parents; leaves are either
// parameters (requires_grad) or constants.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const std::vector<double>& out_grad)> backward;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

// Shared handle to a graph node. Copies alias the same storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor parameter(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape);

    [[nodiscard]] bool defined() const { return node_ != nullptr; }
    [[nodiscard]] const Shape& shape() const { return node_->shape; }
    [[nodiscard]] std::size_t rank() const { return node_->shape.size(); }
    // Negative axes count from the back.
    [[nodiscard]] std::size_t dim(int axis) const;
    [[nodiscard]] std::size_t numel() const { return node_->value.size(); }
    [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }

    [[nodiscard]] std::span<const double> data() const { return node_->value; }
    [[nodiscard]] std::span<double> mutable_data() { return node_->value; }
    [[nodiscard]] const std::vector<double>& values() const { return node_->value; }
    [[nodiscard]] std::span<const double> grad() const { return node_->grad; }
    [[nodiscard]] double item() const;

    void zero_grad() { node_->grad.clear(); }

    [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                              std::function<void(const std::vector<double>&)>);

    std::shared_ptr<Node> node_;
};

// Creates an op output. The backward closure and parent links are recorded
// only when gradients are enabled and some parent requires them.
[[nodiscard]] Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                                 std::function<void(const std::vector<double>&)> backward);

// Reverse-mode sweep from a scalar. Accumulates into every reachable
// requires_grad node and then releases the interior graph.
void backward(const Tensor& scalar_loss);

[[nodiscard]] bool grad_enabled();

// Disables graph recording for its lifetime on the current thread.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

}  // namespace epf::nn
