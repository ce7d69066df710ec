#include <cmath>

#include "epf/models/families.hpp"

namespace epf::models {

using nn::Tensor;

MambaModel::MambaModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    const std::size_t d = c.model_dim, n = kStateDim;
    inner_ = kExpand * d;
    dt_rank_ = (d + 15) / 16;
    embed_ = DataEmbedding(builder("embed."), 1, c.n_features - 1, d, true);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
        auto b = builder("block" + std::to_string(i) + ".");
        Block blk;
        blk.norm = b.param("norm", {d}, std::vector<double>(d, 1.0));
        blk.in_proj = nn::Linear(b.sub("in_proj"), d, 2 * inner_, false);
        const double conv_bound = 1.0 / std::sqrt(static_cast<double>(kConvWidth));
        blk.conv_w = b.param("conv_w", {inner_, kConvWidth}, init_.uniform(inner_ * kConvWidth, conv_bound));
        blk.conv_b = b.param("conv_b", {inner_}, init_.uniform(inner_, conv_bound));
        blk.x_proj = nn::Linear(b.sub("x_proj"), inner_, dt_rank_ + 2 * n, false);

        auto db = b.sub("dt_proj");
        const double dt_bound = 1.0 / std::sqrt(static_cast<double>(dt_rank_));
        blk.dt_proj.weight = db.param("weight", {dt_rank_, inner_}, init_.uniform(dt_rank_ * inner_, dt_bound));
        // Step sizes start log-uniform in [1e-3, 1e-1]; the bias holds their
        // softplus preimage.
        std::vector<double> dt_bias(inner_);
        for (auto& v : dt_bias) {
            const double dt = std::max(1e-4, std::exp(std::log(1e-3) + init_.uniform01() * (std::log(1e-1) - std::log(1e-3))));
            v = dt + std::log(-std::expm1(-dt));
        }
        blk.dt_proj.bias = db.param("bias", {inner_}, std::move(dt_bias));

        std::vector<double> a_log(inner_ * n);
        for (std::size_t r = 0; r < inner_; ++r)
            for (std::size_t s = 0; s < n; ++s) a_log[r * n + s] = std::log(static_cast<double>(s + 1));
        blk.a_log = b.param("a_log", {inner_, n}, std::move(a_log));
        blk.d_skip = b.param("d_skip", {inner_}, std::vector<double>(inner_, 1.0));
        blk.out_proj = nn::Linear(b.sub("out_proj"), inner_, d, false);
        blocks_.push_back(std::move(blk));
    }
    norm_f_ = builder().param("norm_f", {d}, std::vector<double>(d, 1.0));
    out_ = nn::Linear(builder("out."), d, 1);
    time_head_ = nn::Linear(builder("time_head."), c.lookback, c.horizon);
}

Tensor MambaModel::mixer(const Block& blk, const Tensor& x) const {
    const std::size_t n = kStateDim;
    const Tensor xz = blk.in_proj(x);
    Tensor xs = nn::slice(xz, 2, 0, inner_);
    const Tensor z = nn::slice(xz, 2, inner_, inner_);
    xs = nn::silu(nn::depthwise_causal_conv1d(xs, blk.conv_w, blk.conv_b));
    const Tensor dbl = blk.x_proj(xs);
    const Tensor delta = nn::softplus(blk.dt_proj(nn::slice(dbl, 2, 0, dt_rank_)));
    const Tensor b_in = nn::slice(dbl, 2, dt_rank_, n);
    const Tensor c_out = nn::slice(dbl, 2, dt_rank_ + n, n);
    const Tensor a = nn::scale(nn::exp(blk.a_log), -1.0);
    const Tensor y = nn::selective_scan(xs, delta, a, b_in, c_out, blk.d_skip);
    return blk.out_proj(nn::mul(y, nn::silu(z)));
}

Tensor MambaModel::forward(const Tensor& x) const {
    const std::size_t batch = x.dim(0), len = x.dim(1);
    const auto stats = InstanceNorm::fit(x);
    Tensor h = embed_(stats.normalize(price_channel(x)), calendar_channels(x));
    for (const auto& blk : blocks_) h = nn::add(h, mixer(blk, nn::rms_norm(h, blk.norm)));
    h = nn::rms_norm(h, norm_f_);
    const Tensor per_step = nn::reshape(out_(h), {batch, len});
    return stats.denormalize(time_head_(per_step));
}

}  // namespace epf::models
