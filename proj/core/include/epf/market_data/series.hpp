#pragma once

#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epf/error.hpp"
#include "epf/market_data/calendar.hpp"
#include "epf/market_data/region.hpp"

namespace epf {

// Market price floor and cap over the study period, A$/MWh.
inline constexpr double kMarketFloor = -1000.0;
inline constexpr double kMarketCap = 17500.0;

// A gap-free, uniformly stepped regional price series. Timestamps are implied
// by (start, step, index) and mark the *start* of each interval.
template <int StepMinutes>
class PriceSeries {
public:
    static constexpr std::chrono::minutes kStep{StepMinutes};
    static constexpr int kPerDay = 1440 / StepMinutes;

    PriceSeries(Region region, MarketTime start, std::vector<double> prices)
        : region_(region), start_(start), prices_(std::move(prices)) {
        for (std::size_t i = 0; i < prices_.size(); ++i) {
            const double p = prices_[i];
            if (!std::isfinite(p) || p < kMarketFloor || p > kMarketCap) {
                throw IntegrityError("price " + std::to_string(p) + " at " +
                                     format_market_time(timestamp(i)) +
                                     " is outside the market floor/cap");
            }
        }
    }

    [[nodiscard]] Region region() const { return region_; }
    [[nodiscard]] MarketTime start() const { return start_; }
    [[nodiscard]] MarketTime end() const { return timestamp(prices_.size()); }
    [[nodiscard]] std::size_t size() const { return prices_.size(); }
    [[nodiscard]] bool empty() const { return prices_.empty(); }
    [[nodiscard]] std::span<const double> prices() const { return prices_; }
    [[nodiscard]] double operator[](std::size_t i) const { return prices_[i]; }

    [[nodiscard]] MarketTime timestamp(std::size_t i) const {
        return start_ + std::chrono::duration_cast<std::chrono::seconds>(kStep) *
                            static_cast<long long>(i);
    }

    // Index of the interval starting at t; throws RangeError if t is not on the
    // grid or lies outside [start, end].
    [[nodiscard]] std::size_t index_of(MarketTime t) const {
        const auto offset = (t - start_).count();
        const auto step = std::chrono::duration_cast<std::chrono::seconds>(kStep).count();
        if (offset < 0 || offset % step != 0 ||
            static_cast<std::size_t>(offset / step) > prices_.size()) {
            throw RangeError(format_market_time(t) + " is not an interval boundary of the series");
        }
        return static_cast<std::size_t>(offset / step);
    }

    [[nodiscard]] PriceSeries slice(std::size_t first, std::size_t count) const {
        if (first + count > prices_.size()) throw RangeError("slice beyond end of series");
        return PriceSeries(region_, timestamp(first),
                           std::vector<double>(prices_.begin() + static_cast<std::ptrdiff_t>(first),
                                               prices_.begin() +
                                                   static_cast<std::ptrdiff_t>(first + count)));
    }

    friend bool operator==(const PriceSeries&, const PriceSeries&) = default;

private:
    Region region_;
    MarketTime start_;
    std::vector<double> prices_;
};

using RawPriceSeries = PriceSeries<5>;
using HalfHourlySeries = PriceSeries<30>;

}  // namespace epf
