#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "epf/pipeline/dataset.hpp"

namespace epf::pipeline {

struct PrepareOptions {
    std::size_t lookback = 336;
    std::size_t horizon = 48;
    MarketTime test_start;
    double train_fraction = 0.7;
    ScalerFit scaler_fit = ScalerFit::Train;
};

// One region's 30-minute series, split, scaled and ready to window for one
// (L, H) setting. The scaled matrix always carries all five columns; windows
// for price-only families read a single-column copy.
class PreparedDataset {
public:
    PreparedDataset(HalfHourlySeries series, std::size_t lookback, std::size_t horizon, DatasetSplit split,
                    ScalerParams scaler);

    [[nodiscard]] const HalfHourlySeries& series() const { return series_; }
    [[nodiscard]] Region region() const { return series_.region(); }
    [[nodiscard]] std::size_t lookback() const { return lookback_; }
    [[nodiscard]] std::size_t horizon() const { return horizon_; }
    [[nodiscard]] const DatasetSplit& split() const { return split_; }
    [[nodiscard]] const ScalerParams& scaler() const { return scaler_; }
    [[nodiscard]] const FeatureMatrix& scaled(bool with_time_features) const;

    [[nodiscard]] WindowSet train_windows(bool with_time_features) const;
    [[nodiscard]] WindowSet val_windows(bool with_time_features) const;
    [[nodiscard]] WindowSet test_windows(bool with_time_features) const;

    // Raw test-period prices, the rMAE benchmark series.
    [[nodiscard]] HalfHourlySeries test_series() const;

private:
    [[nodiscard]] WindowSet windows(IndexRange segment, bool with_time_features) const;

    HalfHourlySeries series_;
    std::size_t lookback_;
    std::size_t horizon_;
    DatasetSplit split_;
    ScalerParams scaler_;
    std::shared_ptr<const FeatureMatrix> full_;
    std::shared_ptr<const FeatureMatrix> price_only_;
};

// downsampled series -> split -> calendar features -> scaler. SegmentTooShort
// if any partition cannot hold one window.
[[nodiscard]] PreparedDataset prepare_dataset(const HalfHourlySeries& series, const PrepareOptions& options);

// Price column as a columnar file plus a ".json" manifest with L, H, the
// split, and the scaler. Loading rebuilds the scaled matrix deterministically.
void save_prepared(const std::filesystem::path& path, const PreparedDataset& data);
[[nodiscard]] PreparedDataset load_prepared(const std::filesystem::path& path);

}  // namespace epf::pipeline
