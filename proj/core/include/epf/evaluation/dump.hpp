#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "epf/market_data/calendar.hpp"
#include "epf/models/forecaster.hpp"
#include "epf/pipeline/dataset.hpp"

namespace epf::evaluation {

struct DumpMeta {
    std::string region;
    std::string setting;  // "24H" or "48H"
    std::string family;
    std::uint64_t seed = 0;
    std::size_t horizon = 0;

    friend bool operator==(const DumpMeta&, const DumpMeta&) = default;
};

// Long-format forecasts in A$/MWh: one row per (window, step). Steps of a
// window are stored contiguously and in order.
struct ForecastDump {
    DumpMeta meta;
    std::vector<std::int64_t> window_id;
    std::vector<std::int64_t> step;  // 1..H
    std::vector<MarketTime> target_timestamp;
    std::vector<double> y_true;
    std::vector<double> y_pred;

    [[nodiscard]] std::size_t size() const { return y_true.size(); }
    [[nodiscard]] bool empty() const { return y_true.empty(); }
    void push(std::int64_t window, std::int64_t s, MarketTime t, double truth, double pred);

    friend bool operator==(const ForecastDump&, const ForecastDump&) = default;
};

// Runs the model over every window of `windows` and denormalises the
// predictions. `prices` are the unscaled prices on the matrix row axis, so
// y_true is taken verbatim rather than through the scaler round trip.
[[nodiscard]] ForecastDump make_forecast_dump(const models::Forecaster& model, const pipeline::WindowSet& windows,
                                              const pipeline::ScalerParams& scaler, std::span<const double> prices,
                                              DumpMeta meta, std::size_t batch_size = 256);

// The weekly seasonal naive forecaster y_hat_t = y_{t-lag}, written as
// consecutive windows of `horizon` steps that tile t = lag..M-1 exactly once
// (the last window may be shorter).
[[nodiscard]] ForecastDump naive_forecast_dump(std::span<const double> prices, MarketTime start, std::size_t lag,
                                               std::size_t horizon, DumpMeta meta);

// Columnar file plus a ".json" sidecar with the metadata.
void write_dump(const std::filesystem::path& path, const ForecastDump& dump);
[[nodiscard]] ForecastDump read_dump(const std::filesystem::path& path);

}  // namespace epf::evaluation
