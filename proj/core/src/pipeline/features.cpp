#include "epf/pipeline/features.hpp"

namespace epf::pipeline {

HalfHourlySeries downsample_to_30min(const RawPriceSeries& raw) {
    constexpr std::size_t kBlock = 6;
    if (raw.size() % kBlock != 0) {
        throw AlignmentError("5-minute series length " + std::to_string(raw.size()) +
                             " is not a multiple of 6");
    }
    if (epoch_seconds(raw.start()) % 1800 != 0) {
        throw AlignmentError("series start " + format_market_time(raw.start()) +
                             " is not on a half-hour boundary");
    }
    const auto prices = raw.prices();
    std::vector<double> out(raw.size() / kBlock);
    for (std::size_t k = 0; k < out.size(); ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < kBlock; ++j) sum += prices[k * kBlock + j];
        out[k] = sum / static_cast<double>(kBlock);
    }
    return HalfHourlySeries(raw.region(), raw.start(), std::move(out));
}

FeatureMatrix::FeatureMatrix(MarketTime start, std::vector<std::string> columns, std::size_t rows,
                             std::vector<double> values)
    : start_(start), columns_(std::move(columns)), rows_(rows), values_(std::move(values)) {
    if (columns_.empty() || columns_.front() != "price") {
        throw ShapeError("feature matrix must lead with the price column");
    }
    if (values_.size() != rows_ * columns_.size()) {
        throw ShapeError("feature matrix values do not match rows x columns");
    }
}

std::vector<double> FeatureMatrix::column(std::size_t col) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, col);
    return out;
}

FeatureMatrix FeatureMatrix::select(bool with_time_features) const {
    if (with_time_features) {
        if (cols() != kFeatureColumns.size()) throw ShapeError("matrix carries no calendar columns");
        return *this;
    }
    return FeatureMatrix(start_, {"price"}, rows_, column(0));
}

FeatureMatrix add_time_features(const HalfHourlySeries& series) {
    const std::size_t n = series.size();
    std::vector<double> values;
    values.reserve(n * kFeatureColumns.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = calendar_fields(series.timestamp(i));
        values.push_back(series[i]);
        values.push_back(f.hour_of_day);
        values.push_back(f.day_of_week);
        values.push_back(f.day_of_month);
        values.push_back(f.month_of_year);
    }
    return FeatureMatrix(series.start(), kFeatureColumns, n, std::move(values));
}

}  // namespace epf::pipeline
