#include "epf/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace epf::pipeline {

DatasetSplit chronological_split(const HalfHourlySeries& series, MarketTime test_start,
                                 double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    if (test_start <= series.start() || test_start >= series.end()) {
        throw RangeError("test start " + format_market_time(test_start) +
                         " is not strictly inside the series");
    }
    const std::size_t n_pre = series.index_of(test_start);
    const auto n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n_pre)));
    if (n_train == 0 || n_train == n_pre) throw RangeError("split leaves an empty partition");
    return DatasetSplit{
        .train = {0, n_train},
        .val = {n_train, n_pre},
        .test = {n_pre, series.size()},
    };
}

double ScalerParams::scale(std::size_t col, double x) const {
    if (degenerate[col]) return 0.0;
    return (x - min[col]) / (max[col] - min[col]);
}

double ScalerParams::invert(std::size_t col, double s) const {
    if (degenerate[col]) return min[col];
    return s * (max[col] - min[col]) + min[col];
}

ScalerParams fit_scaler(const FeatureMatrix& matrix, const DatasetSplit& split, ScalerFit fit) {
    const IndexRange rows{split.train.begin, fit == ScalerFit::Train ? split.train.end : split.val.end};
    if (rows.size() == 0 || rows.end > matrix.rows()) throw RangeError("scaler fit range is empty");
    ScalerParams p;
    p.fitted_on = fit == ScalerFit::Train ? "train" : "train+val";
    const std::size_t c = matrix.cols();
    p.min.assign(c, std::numeric_limits<double>::infinity());
    p.max.assign(c, -std::numeric_limits<double>::infinity());
    for (std::size_t r = rows.begin; r < rows.end; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
            p.min[j] = std::min(p.min[j], matrix.at(r, j));
            p.max[j] = std::max(p.max[j], matrix.at(r, j));
        }
    }
    p.degenerate.resize(c);
    for (std::size_t j = 0; j < c; ++j) p.degenerate[j] = p.max[j] == p.min[j];
    return p;
}

FeatureMatrix apply_scaler(const FeatureMatrix& matrix, const ScalerParams& params) {
    if (params.min.size() != matrix.cols()) throw ShapeError("scaler/matrix column mismatch");
    std::vector<double> values(matrix.values().begin(), matrix.values().end());
    const std::size_t c = matrix.cols();
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t j = 0; j < c; ++j) values[r * c + j] = params.scale(j, values[r * c + j]);
    }
    return FeatureMatrix(matrix.start(), matrix.columns(), matrix.rows(), std::move(values));
}

std::vector<double> invert_prices(std::span<const double> scaled, const ScalerParams& params) {
    std::vector<double> out(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) out[i] = params.invert(0, scaled[i]);
    return out;
}

WindowSet::WindowSet(std::shared_ptr<const FeatureMatrix> matrix, IndexRange segment,
                     std::size_t lookback, std::size_t horizon)
    : matrix_(std::move(matrix)), segment_(segment), lookback_(lookback), horizon_(horizon) {
    if (!matrix_) throw ShapeError("window set needs a feature matrix");
    if (lookback_ == 0 || horizon_ == 0) throw ConfigError("lookback and horizon must be positive");
    if (segment_.end > matrix_->rows() || segment_.begin > segment_.end) {
        throw RangeError("segment lies outside the feature matrix");
    }
    if (segment_.size() < lookback_ + horizon_) {
        throw SegmentTooShort("segment of " + std::to_string(segment_.size()) +
                              " rows cannot hold lookback " + std::to_string(lookback_) +
                              " + horizon " + std::to_string(horizon_));
    }
    count_ = segment_.size() - lookback_ - horizon_ + 1;
}

void WindowSet::gather_inputs(std::span<const std::size_t> windows, std::span<double> out) const {
    const std::size_t c = matrix_->cols();
    const std::size_t per = lookback_ * c;
    if (out.size() != windows.size() * per) throw ShapeError("input buffer size mismatch");
    const auto values = matrix_->values();
    for (std::size_t b = 0; b < windows.size(); ++b) {
        const std::size_t first = input_row(windows[b]) * c;
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(first), per,
                    out.begin() + static_cast<std::ptrdiff_t>(b * per));
    }
}

void WindowSet::gather_targets(std::span<const std::size_t> windows, std::span<double> out) const {
    if (out.size() != windows.size() * horizon_) throw ShapeError("target buffer size mismatch");
    for (std::size_t b = 0; b < windows.size(); ++b) {
        for (std::size_t h = 0; h < horizon_; ++h) {
            out[b * horizon_ + h] = matrix_->at(target_row(windows[b], h), 0);
        }
    }
}

WindowSet build_windows(std::shared_ptr<const FeatureMatrix> matrix, IndexRange segment,
                        std::size_t lookback, std::size_t horizon) {
    return WindowSet(std::move(matrix), segment, lookback, horizon);
}

}  // namespace epf::pipeline
