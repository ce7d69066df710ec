#pragma once

#include <span>
#include <string>
#include <vector>

#include "epf/market_data/series.hpp"

namespace epf::pipeline {

// Half-open row range [begin, end) on the 30-minute axis.
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const { return end - begin; }
    [[nodiscard]] bool contains(std::size_t i) const { return i >= begin && i < end; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

// Arithmetic mean of each run of six consecutive 5-minute prices. The raw
// series must start on a half-hour boundary and hold whole half-hours.
[[nodiscard]] HalfHourlySeries downsample_to_30min(const RawPriceSeries& raw);

inline const std::vector<std::string> kFeatureColumns{"price", "hour_of_day", "day_of_week",
                                                      "day_of_month", "month_of_year"};

// Row-per-interval numeric matrix on the 30-minute grid. Column 0 is always
// the price; calendar columns, when present, follow in kFeatureColumns order.
class FeatureMatrix {
public:
    FeatureMatrix(MarketTime start, std::vector<std::string> columns, std::size_t rows,
                  std::vector<double> values);

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return columns_.size(); }
    [[nodiscard]] const std::vector<std::string>& columns() const { return columns_; }
    [[nodiscard]] MarketTime start() const { return start_; }
    [[nodiscard]] MarketTime timestamp(std::size_t row) const { return start_ + kHalfHour * static_cast<long>(row); }

    [[nodiscard]] double at(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
    [[nodiscard]] double& at(std::size_t row, std::size_t col) { return values_[row * cols() + col]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return std::span<const double>(values_).subspan(r * cols(), cols());
    }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::vector<double> column(std::size_t col) const;

    // Price column only, or price plus the four calendar columns.
    [[nodiscard]] FeatureMatrix select(bool with_time_features) const;

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    MarketTime start_;
    std::vector<std::string> columns_;
    std::size_t rows_;
    std::vector<double> values_;
};

// Five-column matrix: price plus hour of day, day of week (Monday = 0), day of
// month and month of year, all derived from interval start timestamps.
[[nodiscard]] FeatureMatrix add_time_features(const HalfHourlySeries& series);

}  // namespace epf::pipeline
