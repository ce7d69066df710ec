#include <cmath>

#include "epf/models/families.hpp"

namespace epf::models {

using nn::Tensor;

namespace {

Tensor last_step(const Tensor& h) {
    const std::size_t batch = h.dim(0), len = h.dim(1), d = h.dim(2);
    return nn::reshape(nn::slice(h, 1, len - 1, 1), {batch, d});
}

}  // namespace

LstmModel::LstmModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    for (std::size_t i = 0; i < c.n_layers; ++i) {
        layers_.emplace_back(builder("lstm" + std::to_string(i) + "."), i == 0 ? c.n_features : c.model_dim,
                             c.model_dim);
    }
    head_ = nn::Linear(builder("head."), c.model_dim, c.horizon);
}

Tensor LstmModel::forward(const Tensor& x) const {
    Tensor h = x;
    for (const auto& layer : layers_) h = layer(h);
    return head_(last_step(h));
}

CnnLstmModel::CnnLstmModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    const std::size_t f = *c.cnn_filters, k = *c.cnn_kernel;
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.n_features * k));
    auto b = builder("conv.");
    conv_w_ = b.param("weight", {f, c.n_features, k}, init_.uniform(f * c.n_features * k, bound));
    conv_b_ = b.param("bias", {f}, init_.uniform(f, bound));
    for (std::size_t i = 0; i < c.n_layers; ++i) {
        layers_.emplace_back(builder("lstm" + std::to_string(i) + "."), i == 0 ? f : c.model_dim, c.model_dim);
    }
    head_ = nn::Linear(builder("head."), c.model_dim, c.horizon);
}

Tensor CnnLstmModel::forward(const Tensor& x) const {
    const std::size_t pad = (conv_w_.dim(2) - 1) / 2;
    Tensor h = nn::relu(nn::conv1d(nn::permute(x, {0, 2, 1}), conv_w_, conv_b_, pad, pad));
    h = nn::permute(h, {0, 2, 1});
    for (const auto& layer : layers_) h = layer(h);
    return head_(last_step(h));
}

TransformerModel::TransformerModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    const std::size_t d = c.model_dim;
    embed_ = nn::Linear(builder("embed."), c.n_features, d);
    positions_ = builder().param("positions", {c.lookback, d}, init_.uniform(c.lookback * d, 0.02));
    for (std::size_t i = 0; i < c.n_layers; ++i) {
        layers_.emplace_back(builder("enc" + std::to_string(i) + "."), d, 4 * d, nn::Activation::Relu);
    }
    head_ = nn::Linear(builder("head."), c.lookback * d, c.horizon);
}

Tensor TransformerModel::forward(const Tensor& x) const {
    const std::size_t batch = x.dim(0);
    Tensor h = nn::add_trailing(embed_(x), positions_);
    for (const auto& layer : layers_) h = layer(h);
    return head_(nn::reshape(h, {batch, h.numel() / batch}));
}

DLinearModel::DLinearModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    const std::size_t l = c.lookback, h = c.horizon;
    const double bound = 1.0 / std::sqrt(static_cast<double>(l));
    auto make = [&](const std::string& name) {
        nn::Linear lin;
        auto b = builder(name + ".");
        lin.weight = b.param("weight", {l, h}, std::vector<double>(l * h, 1.0 / static_cast<double>(l)));
        lin.bias = b.param("bias", {h}, init_.uniform(h, bound));
        return lin;
    };
    trend_ = make("trend");
    seasonal_ = make("seasonal");
}

std::pair<Tensor, Tensor> DLinearModel::decompose(const Tensor& x) {
    Tensor trend = nn::moving_average(x, kKernel);
    Tensor seasonal = nn::sub(x, trend);
    return {trend, seasonal};
}

Tensor DLinearModel::forward(const Tensor& x) const {
    const std::size_t batch = x.dim(0), len = x.dim(1);
    auto [trend, seasonal] = decompose(price_channel(x));
    return nn::add(trend_(nn::reshape(trend, {batch, len})), seasonal_(nn::reshape(seasonal, {batch, len})));
}

ITransformerModel::ITransformerModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    const std::size_t d = c.model_dim;
    embed_ = nn::Linear(builder("embed."), c.lookback, d);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
        layers_.emplace_back(builder("enc" + std::to_string(i) + "."), d, 4 * d, nn::Activation::Gelu);
    }
    norm_ = nn::LayerNorm(builder("norm."), d);
    project_ = nn::Linear(builder("project."), d, c.horizon);
}

Tensor ITransformerModel::forward(const Tensor& x) const {
    const std::size_t batch = x.dim(0), horizon = config_.horizon;
    const auto stats = InstanceNorm::fit(x);
    Tensor series = stats.normalize(price_channel(x));
    if (Tensor marks = calendar_channels(x); marks.defined()) series = nn::concat({series, marks}, 2);
    // [B, L, C] -> C variate tokens of width d
    Tensor tokens = embed_(nn::permute(series, {0, 2, 1}));
    for (const auto& layer : layers_) tokens = layer(tokens);
    Tensor out = project_(norm_(tokens));  // [B, C, H]
    return stats.denormalize(nn::reshape(nn::slice(out, 1, 0, 1), {batch, horizon}));
}

}  // namespace epf::models
