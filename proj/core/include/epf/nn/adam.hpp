#pragma once

#include <vector>

#include "epf/nn/layers.hpp"

namespace epf::nn {

// Adaptive-moment optimizer with bias correction. Steps every parameter of
// the store that received a gradient in the last backward pass.
class Adam {
public:
    explicit Adam(ParameterStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad() { store_.zero_grad(); }

    [[nodiscard]] double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    [[nodiscard]] long steps() const { return t_; }

private:
    ParameterStore& store_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace epf::nn
