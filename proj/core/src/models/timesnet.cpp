#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "epf/models/families.hpp"

namespace epf::models {

using nn::Tensor;

TimesNetModel::Inception::Inception(const nn::Builder& b, std::size_t cin, std::size_t cout) {
    for (std::size_t i = 0; i < kNumKernels; ++i) {
        const std::size_t k = 2 * i + 1;
        const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
        auto kb = b.sub("k" + std::to_string(k));
        weights.push_back(kb.param("weight", {cout, cin, k, k}, b.init.uniform(cout * cin * k * k, bound)));
        biases.push_back(kb.param("bias", {cout}, std::vector<double>(cout, 0.0)));
    }
}

Tensor TimesNetModel::Inception::operator()(const Tensor& x) const {
    Tensor sum = nn::conv2d_same(x, weights[0], biases[0]);
    for (std::size_t i = 1; i < weights.size(); ++i) sum = nn::add(sum, nn::conv2d_same(x, weights[i], biases[i]));
    return nn::scale(sum, 1.0 / static_cast<double>(weights.size()));
}

TimesNetModel::TimesNetModel(const ModelConfig& c, std::uint64_t seed) : Forecaster(c, seed) {
    const std::size_t d = c.model_dim;
    const std::size_t d_ff = d;
    embed_ = DataEmbedding(builder("embed."), 1, c.n_features - 1, d, true);
    predict_ = nn::Linear(builder("predict."), c.lookback, c.lookback + c.horizon);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
        const std::string p = "block" + std::to_string(i) + ".";
        blocks_.push_back(Block{Inception(builder(p + "conv1."), d, d_ff), Inception(builder(p + "conv2."), d_ff, d)});
    }
    norm_ = nn::LayerNorm(builder("norm."), d);
    project_ = nn::Linear(builder("project."), d, 1);
}

std::vector<std::size_t> TimesNetModel::dominant_frequencies(std::span<const double> values, std::size_t batch,
                                                             std::size_t len, std::size_t channels, std::size_t k) {
    const std::size_t nf = len / 2;
    std::vector<double> amp(nf + 1, 0.0);
    Eigen::FFT<double> fft;
    std::vector<double> series(len);
    std::vector<std::complex<double>> spec;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t t = 0; t < len; ++t) series[t] = values[(b * len + t) * channels + c];
            fft.fwd(spec, series);
            for (std::size_t f = 1; f <= nf; ++f) amp[f] += std::abs(spec[f]);
        }
    std::vector<std::size_t> order(nf);
    std::iota(order.begin(), order.end(), std::size_t{1});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return amp[a] > amp[b]; });
    order.resize(std::min(k, order.size()));
    return order;
}

Tensor TimesNetModel::times_block(const Block& block, const Tensor& x) const {
    const std::size_t batch = x.dim(0), len = x.dim(1), d = x.dim(2);
    const auto freqs = dominant_frequencies(x.values(), batch, len, d, kTopK);
    const Tensor weights = nn::softmax(nn::spectral_amplitude(x, freqs));  // [B, k]
    Tensor out = x;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const std::size_t period = len / freqs[i];
        const std::size_t rows = (len + period - 1) / period;
        Tensor grid = nn::resize_time(x, rows * period);
        grid = nn::permute(nn::reshape(grid, {batch, rows, period, d}), {0, 3, 1, 2});
        Tensor h = block.conv2(nn::gelu(block.conv1(grid)));
        h = nn::reshape(nn::permute(h, {0, 2, 3, 1}), {batch, rows * period, d});
        h = nn::resize_time(h, len);
        out = nn::add(out, nn::scale_rows(h, nn::reshape(nn::slice(weights, 1, i, 1), {batch})));
    }
    return out;
}

Tensor TimesNetModel::forward(const Tensor& x) const {
    const std::size_t batch = x.dim(0), len = config_.lookback, horizon = config_.horizon;
    const auto stats = InstanceNorm::fit(x);
    Tensor h = embed_(stats.normalize(price_channel(x)), calendar_channels(x));
    h = nn::permute(predict_(nn::permute(h, {0, 2, 1})), {0, 2, 1});  // [B, L + H, d]
    for (const auto& block : blocks_) h = norm_(times_block(block, h));
    Tensor y = nn::slice(project_(h), 1, len, horizon);
    return stats.denormalize(nn::reshape(y, {batch, horizon}));
}

}  // namespace epf::models
