#include <algorithm>

#include "epf/models/families.hpp"

namespace epf::models {

using nn::Tensor;

TimeMixerModel::TimeMixerModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    const std::size_t d = c.model_dim, d_ff = 2 * d;
    lengths_.push_back(c.lookback);
    for (std::size_t i = 0; i < kScales; ++i) lengths_.push_back(lengths_.back() / kWindow);
    embed_ = DataEmbedding(builder("embed."), 1, c.n_features - 1, d, false);
    for (std::size_t l = 0; l < c.n_layers; ++l) {
        const std::string p = "pdm" + std::to_string(l) + ".";
        Pdm blk;
        for (std::size_t i = 0; i < kScales; ++i) {
            const std::string q = p + "down" + std::to_string(i) + ".";
            blk.down.push_back(Mlp{nn::Linear(builder(q + "a."), lengths_[i], lengths_[i + 1]),
                                   nn::Linear(builder(q + "b."), lengths_[i + 1], lengths_[i + 1])});
        }
        for (std::size_t i = kScales; i > 0; --i) {
            const std::string q = p + "up" + std::to_string(i) + ".";
            blk.up.push_back(Mlp{nn::Linear(builder(q + "a."), lengths_[i], lengths_[i - 1]),
                                 nn::Linear(builder(q + "b."), lengths_[i - 1], lengths_[i - 1])});
        }
        blk.cross = Mlp{nn::Linear(builder(p + "cross.a."), d, d_ff), nn::Linear(builder(p + "cross.b."), d_ff, d)};
        blocks_.push_back(std::move(blk));
    }
    for (std::size_t i = 0; i <= kScales; ++i) {
        predict_.emplace_back(builder("predict" + std::to_string(i) + "."), lengths_[i], c.horizon);
    }
    project_ = nn::Linear(builder("project."), d, 1);
}

std::vector<Tensor> TimeMixerModel::pdm(const Pdm& blk, const std::vector<Tensor>& xs) const {
    const std::size_t n = xs.size();
    std::vector<Tensor> season, trend;
    for (const auto& x : xs) {
        Tensor t = nn::moving_average(x, kMovingAvg);
        season.push_back(nn::permute(nn::sub(x, t), {0, 2, 1}));
        trend.push_back(nn::permute(t, {0, 2, 1}));
    }
    // Seasonal information flows from fine to coarse scales.
    std::vector<Tensor> out_season{season[0]};
    Tensor high = season[0], low = season[1];
    for (std::size_t i = 0; i + 1 < n; ++i) {
        low = nn::add(low, blk.down[i](high));
        high = low;
        if (i + 2 < n) low = season[i + 2];
        out_season.push_back(high);
    }
    // Trend information flows from coarse to fine.
    std::vector<Tensor> rev(trend.rbegin(), trend.rend());
    std::vector<Tensor> out_trend{rev[0]};
    Tensor coarse = rev[0], fine = rev[1];
    for (std::size_t i = 0; i + 1 < n; ++i) {
        fine = nn::add(fine, blk.up[i](coarse));
        coarse = fine;
        if (i + 2 < n) fine = rev[i + 2];
        out_trend.push_back(coarse);
    }
    std::reverse(out_trend.begin(), out_trend.end());

    std::vector<Tensor> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Tensor mixed = nn::permute(nn::add(out_season[i], out_trend[i]), {0, 2, 1});
        out.push_back(nn::add(xs[i], blk.cross(mixed)));
    }
    return out;
}

Tensor TimeMixerModel::forward(const Tensor& x) const {
    const std::size_t batch = x.dim(0), horizon = config_.horizon;
    const auto stats = InstanceNorm::fit(x);
    std::vector<Tensor> series{stats.normalize(price_channel(x))};
    std::vector<Tensor> marks{calendar_channels(x)};
    for (std::size_t i = 0; i < kScales; ++i) {
        series.push_back(nn::avg_pool_time(series.back(), kWindow));
        marks.push_back(marks.back().defined() ? nn::avg_pool_time(marks.back(), kWindow) : Tensor{});
    }
    std::vector<Tensor> enc;
    for (std::size_t i = 0; i < series.size(); ++i) enc.push_back(embed_(series[i], marks[i]));
    for (const auto& blk : blocks_) enc = pdm(blk, enc);

    Tensor sum;
    for (std::size_t i = 0; i < enc.size(); ++i) {
        const Tensor future = nn::permute(predict_[i](nn::permute(enc[i], {0, 2, 1})), {0, 2, 1});  // [B, H, d]
        const Tensor y = project_(future);
        sum = sum.defined() ? nn::add(sum, y) : y;
    }
    return stats.denormalize(nn::reshape(sum, {batch, horizon}));
}

}  // namespace epf::models
