#include "epf/nn/adam.hpp"

#include <cmath>

namespace epf::nn {

Adam::Adam(ParameterStore& store, double lr, double beta1, double beta2, double eps)
    : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [_, t] : store_.entries()) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::size_t idx = 0;
    for (const auto& [_, t] : store_.entries()) {
        auto& m = m_[idx];
        auto& v = v_[idx];
        ++idx;
        const auto g = t.grad();
        if (g.empty()) continue;
        auto w = Tensor(t).mutable_data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

}  // namespace epf::nn
