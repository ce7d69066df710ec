#pragma once

#include <optional>
#include <span>

#include "epf/market_data/series.hpp"

namespace epf {

// Descriptive statistics of a price series. Dispersion uses population
// moments; skewness and kurtosis are the standardised third and fourth central
// moments (plain kurtosis, not excess). Both are absent for zero-variance input.
struct SeriesSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
    std::optional<double> skewness;
    std::optional<double> kurtosis;
};

[[nodiscard]] SeriesSummary summarize(std::span<const double> values);

template <int Step>
[[nodiscard]] SeriesSummary summarize(const PriceSeries<Step>& series) {
    return summarize(series.prices());
}

}  // namespace epf
