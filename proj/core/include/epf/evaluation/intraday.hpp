#pragma once

#include <array>
#include <optional>

#include "epf/evaluation/dump.hpp"
#include "epf/evaluation/metrics.hpp"
#include "epf/market_data/series.hpp"

namespace epf::evaluation {

inline constexpr int kIntervals = kIntervalsPerDay30;

struct IntervalScores {
    std::size_t count = 0;
    std::optional<PointMetrics> point;  // absent when no row lands in the slot
    std::size_t pair_count = 0;
    std::optional<double> mda;          // absent when no in-window pair ends in the slot
};

struct IntradayProfile {
    std::array<IntervalScores, kIntervals> intervals{};
};

// Groups dump rows by the half-hour slot of their target timestamp. A step
// pair (t-1, t) inside one window is credited to the slot of step t.
[[nodiscard]] IntradayProfile intraday_profile(const ForecastDump& dump);

struct DiurnalRow {
    double price_change_std = 0.0;  // population std of y_t - y_{t-1}
    double mean_price = 0.0;
    double pct_negative = 0.0;
    double pct_directional_shift = 0.0;  // sign of the change flips vs the previous step
};

struct DiurnalDiagnostics {
    std::array<DiurnalRow, kIntervals> intervals{};
};

// Actual-price diagnostics per slot. Changes are taken between consecutive
// points, so slot 0 compares against 23:30 of the previous day. Needs two
// full days.
[[nodiscard]] DiurnalDiagnostics diurnal_diagnostics(const HalfHourlySeries& series);

}  // namespace epf::evaluation
