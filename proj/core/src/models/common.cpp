#include <cmath>

#include "epf/error.hpp"
#include "epf/models/families.hpp"

namespace epf::models {

using nn::Tensor;

InstanceNorm InstanceNorm::fit(const Tensor& x) {
    const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
    InstanceNorm n;
    n.mean.resize(batch);
    n.stdev.resize(batch);
    const auto& v = x.values();
    for (std::size_t b = 0; b < batch; ++b) {
        double m = 0.0;
        for (std::size_t t = 0; t < len; ++t) m += v[(b * len + t) * ch];
        m /= static_cast<double>(len);
        double var = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            const double d = v[(b * len + t) * ch] - m;
            var += d * d;
        }
        n.mean[b] = m;
        n.stdev[b] = std::sqrt(var / static_cast<double>(len) + 1e-5);
    }
    return n;
}

Tensor InstanceNorm::normalize(const Tensor& price) const {
    std::vector<double> s(mean.size()), sh(mean.size());
    for (std::size_t b = 0; b < mean.size(); ++b) {
        s[b] = 1.0 / stdev[b];
        sh[b] = -mean[b] / stdev[b];
    }
    return nn::affine_rows(price, s, sh);
}

Tensor InstanceNorm::denormalize(const Tensor& y) const { return nn::affine_rows(y, stdev, mean); }

DataEmbedding::DataEmbedding(const nn::Builder& b, std::size_t c_in, std::size_t n_marks, std::size_t dim,
                             bool with_positions)
    : has_temporal(n_marks > 0), positional(with_positions) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * 3));
    token = b.param("token", {dim, c_in, 3}, b.init.uniform(dim * c_in * 3, bound));
    if (has_temporal) temporal = nn::Linear(b.sub("temporal"), n_marks, dim, false);
}

Tensor DataEmbedding::operator()(const Tensor& values, const Tensor& marks) const {
    const std::size_t len = values.dim(1), dim = token.dim(0);
    Tensor conv = nn::conv1d(nn::permute(values, {0, 2, 1}), token, {}, 1, 1, nn::PadMode::Circular);
    Tensor out = nn::permute(conv, {0, 2, 1});
    if (has_temporal && marks.defined()) out = nn::add(out, temporal(marks));
    if (positional) out = nn::add_trailing(out, nn::sinusoidal_positions(len, dim));
    return out;
}

Tensor price_channel(const Tensor& x) { return nn::slice(x, 2, 0, 1); }

Tensor calendar_channels(const Tensor& x) {
    const std::size_t ch = x.dim(2);
    if (ch < 2) return {};
    return nn::slice(x, 2, 1, ch - 1);
}

}  // namespace epf::models
