#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epf/nn/ops.hpp"
#include "epf/nn/tensor.hpp"

namespace epf::nn {

// Ordered collection of named trainable tensors. Layers register into it at
// construction so the flat layout is fixed by construction order.
class ParameterStore {
public:
    Tensor add(std::string name, Shape shape, std::vector<double> init);

    [[nodiscard]] const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] std::vector<double> flatten() const;
    void assign(std::span<const double> flat);
    [[nodiscard]] std::vector<double> flat_grad() const;
    void zero_grad();

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

// Seeded source of initial parameter values.
class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    std::vector<double> uniform(std::size_t n, double bound);
    std::vector<double> constant(std::size_t n, double v) { return std::vector<double>(n, v); }
    double uniform01();

private:
    std::mt19937_64 rng_;
};

// Everything a layer needs to create its parameters.
struct Builder {
    ParameterStore& store;
    Initializer& init;
    std::string prefix;

    [[nodiscard]] Builder sub(const std::string& name) const { return {store, init, prefix + name + "."}; }
    Tensor param(const std::string& name, Shape shape, std::vector<double> values) const {
        return store.add(prefix + name, std::move(shape), std::move(values));
    }
};

// y = x W + b over the last axis, uniform(+-1/sqrt(in)) init.
struct Linear {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out], undefined when built without bias

    Linear() = default;
    Linear(const Builder& b, std::size_t in, std::size_t out, bool with_bias = true);
    [[nodiscard]] Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

struct LayerNorm {
    Tensor gamma, beta;

    LayerNorm() = default;
    LayerNorm(const Builder& b, std::size_t dim);
    [[nodiscard]] Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

// One recurrent layer; input [B x T x in] -> all hidden states [B x T x h].
struct LstmLayer {
    Linear input;  // in -> 4h, carries the gate bias
    Tensor w_hh;   // [h x 4h]

    LstmLayer() = default;
    LstmLayer(const Builder& b, std::size_t in, std::size_t hidden);
    [[nodiscard]] Tensor operator()(const Tensor& x) const { return lstm_sequence(input(x), w_hh); }
};

// Scaled dot-product attention with `heads` heads over model width d.
struct MultiHeadAttention {
    Linear q, k, v, o;
    std::size_t heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(const Builder& b, std::size_t dim, std::size_t heads);
    // query [B x Tq x d], memory [B x Tk x d] -> [B x Tq x d]
    [[nodiscard]] Tensor operator()(const Tensor& query, const Tensor& memory) const;
};

enum class Activation { Relu, Gelu };

// Post-norm encoder block: x = LN(x + MHA(x)); x = LN(x + FFN(x)).
struct EncoderLayer {
    MultiHeadAttention attn;
    Linear ff1, ff2;
    LayerNorm norm1, norm2;
    Activation act = Activation::Relu;

    EncoderLayer() = default;
    EncoderLayer(const Builder& b, std::size_t dim, std::size_t d_ff, Activation act);
    [[nodiscard]] Tensor operator()(const Tensor& x) const;
    [[nodiscard]] Tensor feed_forward(const Tensor& x) const;
};

// Largest head count <= 8 that divides dim.
[[nodiscard]] std::size_t default_heads(std::size_t dim);

// Fixed sinusoidal position table [len x dim].
[[nodiscard]] Tensor sinusoidal_positions(std::size_t len, std::size_t dim);

[[nodiscard]] Tensor activate(const Tensor& x, Activation act);

}  // namespace epf::nn
