#pragma once

#include <optional>
#include <span>
#include <vector>

#include "epf/evaluation/dump.hpp"

namespace epf::evaluation {

struct PointMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    double smape = 0.0;  // 0..200

    friend bool operator==(const PointMetrics&, const PointMetrics&) = default;
};

// MAE, RMSE and two-sided sMAPE (0/0 terms count as 0) over all rows, or
// over the rows where mask is true. EmptyDump if no row is selected.
[[nodiscard]] PointMetrics point_metrics(const ForecastDump& dump);
[[nodiscard]] PointMetrics point_metrics(const ForecastDump& dump, const std::vector<bool>& mask);
[[nodiscard]] PointMetrics point_metrics(std::span<const double> y_true, std::span<const double> y_pred);

// Weekly seasonal naive benchmark over a test-period price series.
struct NaiveBenchmark {
    std::size_t lag = 336;
    std::size_t length = 0;  // M
    double mae = 0.0;
};

inline constexpr std::size_t kWeeklyLag = 336;

// mean_{t=lag..M-1} |y_t - y_{t-lag}|. SeriesTooShort if M <= lag,
// ZeroBenchmark if the result is exactly 0.
[[nodiscard]] NaiveBenchmark seasonal_naive(std::span<const double> prices, std::size_t lag = kWeeklyLag);

// Model MAE over the benchmark MAE.
[[nodiscard]] double rmae(const ForecastDump& dump, const NaiveBenchmark& bench);

// -1, 0 or +1.
[[nodiscard]] int direction(double delta);

// Mean over windows of the share (in %) of consecutive in-window step pairs
// whose predicted and actual directions agree. Zero changes only match zero
// changes. HorizonTooShort when the dump horizon is below 2.
[[nodiscard]] double mda(const ForecastDump& dump);

// Linear-interpolation percentile of unsorted values, p in [0, 100].
[[nodiscard]] double percentile(std::span<const double> values, double p);

struct SubsetMasks {
    double lower_threshold = 0.0;  // 5th percentile of the test actuals
    double upper_threshold = 0.0;  // 95th percentile
    std::vector<bool> upper_tail;
    std::vector<bool> lower_tail;
    std::vector<bool> extreme;  // upper or lower
    std::vector<bool> negative;
};

// Thresholds come from `test_prices` (the region's test-period actuals); the
// masks index the dump rows.
[[nodiscard]] SubsetMasks subset_masks(const ForecastDump& dump, std::span<const double> test_prices,
                                       double tail_percent = 5.0);

// Metrics over a subset, or nullopt when the subset is empty.
[[nodiscard]] std::optional<PointMetrics> subset_metrics(const ForecastDump& dump, const std::vector<bool>& mask);

// The five headline metrics of one dump.
struct MetricSet {
    double mae = 0.0;
    double rmse = 0.0;
    double smape = 0.0;
    double rmae = 0.0;
    double mda = 0.0;

    friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

[[nodiscard]] MetricSet evaluate(const ForecastDump& dump, const NaiveBenchmark& bench);

}  // namespace epf::evaluation
