#include "epf/nn/layers.hpp"

#include <cmath>

#include "epf/error.hpp"

namespace epf::nn {

Tensor ParameterStore::add(std::string name, Shape shape, std::vector<double> init) {
    Tensor t = Tensor::parameter(std::move(shape), std::move(init));
    entries_.emplace_back(std::move(name), t);
    return t;
}

std::size_t ParameterStore::count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.numel();
    return n;
}

std::vector<double> ParameterStore::flatten() const {
    std::vector<double> flat;
    flat.reserve(count());
    for (const auto& [_, t] : entries_) flat.insert(flat.end(), t.values().begin(), t.values().end());
    return flat;
}

void ParameterStore::assign(std::span<const double> flat) {
    if (flat.size() != count()) {
        throw ShapeError("parameter vector of size " + std::to_string(flat.size()) + ", model has " +
                         std::to_string(count()));
    }
    std::size_t off = 0;
    for (auto& [_, t] : entries_) {
        auto dst = t.mutable_data();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), dst.size(), dst.begin());
        off += dst.size();
    }
}

std::vector<double> ParameterStore::flat_grad() const {
    std::vector<double> g;
    g.reserve(count());
    for (const auto& [_, t] : entries_) {
        if (t.grad().empty()) g.insert(g.end(), t.numel(), 0.0);
        else g.insert(g.end(), t.grad().begin(), t.grad().end());
    }
    return g;
}

void ParameterStore::zero_grad() {
    for (auto& [_, t] : entries_) t.zero_grad();
}

std::vector<double> Initializer::uniform(std::size_t n, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng_);
    return v;
}

double Initializer::uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

Linear::Linear(const Builder& b, std::size_t in, std::size_t out, bool with_bias) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = b.param("weight", {in, out}, b.init.uniform(in * out, bound));
    if (with_bias) bias = b.param("bias", {out}, b.init.uniform(out, bound));
}

LayerNorm::LayerNorm(const Builder& b, std::size_t dim) {
    gamma = b.param("gamma", {dim}, std::vector<double>(dim, 1.0));
    beta = b.param("beta", {dim}, std::vector<double>(dim, 0.0));
}

LstmLayer::LstmLayer(const Builder& b, std::size_t in, std::size_t hidden) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto ib = b.sub("ih");
    input.weight = ib.param("weight", {in, 4 * hidden}, b.init.uniform(in * 4 * hidden, bound));
    input.bias = ib.param("bias", {4 * hidden}, b.init.uniform(4 * hidden, bound));
    w_hh = b.param("w_hh", {hidden, 4 * hidden}, b.init.uniform(hidden * 4 * hidden, bound));
}

MultiHeadAttention::MultiHeadAttention(const Builder& b, std::size_t dim, std::size_t h)
    : q(b.sub("q"), dim, dim), k(b.sub("k"), dim, dim), v(b.sub("v"), dim, dim), o(b.sub("o"), dim, dim), heads(h) {
    if (h == 0 || dim % h != 0) throw ConfigError("attention heads must divide the model width");
}

Tensor MultiHeadAttention::operator()(const Tensor& query, const Tensor& memory) const {
    return o(attention(q(query), k(memory), v(memory), heads));
}

EncoderLayer::EncoderLayer(const Builder& b, std::size_t dim, std::size_t d_ff, Activation a)
    : attn(b.sub("attn"), dim, default_heads(dim)),
      ff1(b.sub("ff1"), dim, d_ff),
      ff2(b.sub("ff2"), d_ff, dim),
      norm1(b.sub("norm1"), dim),
      norm2(b.sub("norm2"), dim),
      act(a) {}

Tensor EncoderLayer::feed_forward(const Tensor& x) const { return ff2(activate(ff1(x), act)); }

Tensor EncoderLayer::operator()(const Tensor& x) const {
    const Tensor h = norm1(add(x, attn(x, x)));
    return norm2(add(h, feed_forward(h)));
}

std::size_t default_heads(std::size_t dim) {
    for (std::size_t h = 8; h > 1; --h)
        if (dim % h == 0) return h;
    return 1;
}

Tensor sinusoidal_positions(std::size_t len, std::size_t dim) {
    std::vector<double> pe(len * dim);
    for (std::size_t p = 0; p < len; ++p) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i - i % 2) / static_cast<double>(dim));
            const double angle = static_cast<double>(p) * freq;
            pe[p * dim + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return Tensor::constant({len, dim}, std::move(pe));
}

Tensor activate(const Tensor& x, Activation act) { return act == Activation::Relu ? relu(x) : gelu(x); }

}  // namespace epf::nn
