#include "epf/models/families.hpp"

namespace epf::models {

using nn::Tensor;

TimeXerModel::TimeXerModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    const std::size_t d = c.model_dim;
    patches_ = c.lookback / kPatchLen;
    patch_embed_ = nn::Linear(builder("patch_embed."), kPatchLen, d, false);
    global_ = builder().param("global", {1, d}, init_.uniform(d, 1.0));
    exo_embed_ = nn::Linear(builder("exo_embed."), c.lookback, d);
    const std::size_t heads = nn::default_heads(d);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
        auto b = builder("layer" + std::to_string(i) + ".");
        layers_.push_back(Layer{nn::MultiHeadAttention(b.sub("self"), d, heads),
                                nn::MultiHeadAttention(b.sub("cross"), d, heads),
                                nn::Linear(b.sub("ff1"), d, 4 * d), nn::Linear(b.sub("ff2"), 4 * d, d),
                                nn::LayerNorm(b.sub("norm1"), d), nn::LayerNorm(b.sub("norm2"), d),
                                nn::LayerNorm(b.sub("norm3"), d)});
    }
    norm_ = nn::LayerNorm(builder("norm."), d);
    head_ = nn::Linear(builder("head."), (patches_ + 1) * d, c.horizon);
}

Tensor TimeXerModel::forward(const Tensor& x) const {
    const std::size_t batch = x.dim(0), len = x.dim(1), d = config_.model_dim;
    const auto stats = InstanceNorm::fit(x);
    const Tensor price = stats.normalize(price_channel(x));  // [B, L, 1]

    // Endogenous patch tokens over the most recent patches_ * P steps, plus
    // one global token appended at the end.
    const std::size_t used = patches_ * kPatchLen;
    Tensor patches = nn::reshape(nn::slice(price, 1, len - used, used), {batch, patches_, kPatchLen});
    Tensor tokens = nn::add_trailing(patch_embed_(patches), nn::sinusoidal_positions(patches_, d));
    const Tensor glb = nn::add_trailing(Tensor::zeros({batch, 1, d}), global_);
    tokens = nn::concat({tokens, glb}, 1);

    // Exogenous variate tokens: calendar series when present, otherwise the
    // price series itself.
    const Tensor marks = calendar_channels(x);
    const Tensor exo_series = marks.defined() ? marks : price;
    const Tensor exo = exo_embed_(nn::permute(exo_series, {0, 2, 1}));  // [B, V, d]

    for (const auto& layer : layers_) {
        tokens = layer.norm1(nn::add(tokens, layer.self_attn(tokens, tokens)));
        const Tensor g = nn::slice(tokens, 1, patches_, 1);
        const Tensor g2 = layer.norm2(nn::add(g, layer.cross_attn(g, exo)));
        tokens = nn::concat({nn::slice(tokens, 1, 0, patches_), g2}, 1);
        tokens = layer.norm3(nn::add(tokens, layer.ff2(nn::gelu(layer.ff1(tokens)))));
    }
    tokens = norm_(tokens);
    const Tensor y = head_(nn::reshape(tokens, {batch, (patches_ + 1) * d}));
    return stats.denormalize(y);
}

}  // namespace epf::models
