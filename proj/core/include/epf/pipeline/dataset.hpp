#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "epf/pipeline/features.hpp"

namespace epf::pipeline {

// Contiguous, disjoint, ordered partitions of the 30-minute axis.
struct DatasetSplit {
    IndexRange train;
    IndexRange val;
    IndexRange test;

    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Everything before `test_start` is divided at floor(train_fraction * n_pre)
// into train and validation; the test partition runs to the end of the series.
[[nodiscard]] DatasetSplit chronological_split(const HalfHourlySeries& series, MarketTime test_start,
                                               double train_fraction);

enum class ScalerFit { Train, TrainVal };

struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;
    std::vector<bool> degenerate;  // max == min on the fit rows; column maps to 0
    std::string fitted_on;         // "train" or "train+val"

    [[nodiscard]] double scale(std::size_t col, double x) const;
    [[nodiscard]] double invert(std::size_t col, double s) const;

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

// Per-column min-max over the fit partition only.
[[nodiscard]] ScalerParams fit_scaler(const FeatureMatrix& matrix, const DatasetSplit& split,
                                      ScalerFit fit = ScalerFit::Train);

// Affine map to [0, 1] on the fit rows; rows outside it may leave [0, 1] and
// are passed through unclipped.
[[nodiscard]] FeatureMatrix apply_scaler(const FeatureMatrix& matrix, const ScalerParams& params);

// Scaled prices (column 0) back to A$/MWh.
[[nodiscard]] std::vector<double> invert_prices(std::span<const double> scaled,
                                                const ScalerParams& params);

// Supervised (lookback, horizon) windows with stride 1 over one segment.
// Window i reads rows [s + i, s + i + L) and targets the price column of rows
// [s + i + L, s + i + L + H), where s is the segment start. Windows are views
// into a shared matrix; batches are materialised on demand.
class WindowSet {
public:
    WindowSet(std::shared_ptr<const FeatureMatrix> matrix, IndexRange segment, std::size_t lookback,
              std::size_t horizon);

    [[nodiscard]] std::size_t size() const { return count_; }
    [[nodiscard]] bool empty() const { return count_ == 0; }
    [[nodiscard]] std::size_t lookback() const { return lookback_; }
    [[nodiscard]] std::size_t horizon() const { return horizon_; }
    [[nodiscard]] std::size_t n_features() const { return matrix_->cols(); }
    [[nodiscard]] IndexRange segment() const { return segment_; }
    [[nodiscard]] const FeatureMatrix& matrix() const { return *matrix_; }

    [[nodiscard]] std::size_t input_row(std::size_t window) const { return segment_.begin + window; }
    [[nodiscard]] std::size_t target_row(std::size_t window, std::size_t step) const {
        return segment_.begin + window + lookback_ + step;
    }
    [[nodiscard]] MarketTime target_timestamp(std::size_t window, std::size_t step) const {
        return matrix_->timestamp(target_row(window, step));
    }

    // out: [windows.size() x L x C], row-major.
    void gather_inputs(std::span<const std::size_t> windows, std::span<double> out) const;
    // out: [windows.size() x H] scaled prices.
    void gather_targets(std::span<const std::size_t> windows, std::span<double> out) const;

private:
    std::shared_ptr<const FeatureMatrix> matrix_;
    IndexRange segment_;
    std::size_t lookback_;
    std::size_t horizon_;
    std::size_t count_;
};

[[nodiscard]] WindowSet build_windows(std::shared_ptr<const FeatureMatrix> matrix, IndexRange segment,
                                      std::size_t lookback, std::size_t horizon);

}  // namespace epf::pipeline
