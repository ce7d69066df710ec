#include "epf/evaluation/dump.hpp"

#include <nlohmann/json.hpp>

#include "epf/error.hpp"
#include "epf/io/columnar.hpp"

namespace epf::evaluation {

void ForecastDump::push(std::int64_t window, std::int64_t s, MarketTime t, double truth, double pred) {
    window_id.push_back(window);
    step.push_back(s);
    target_timestamp.push_back(t);
    y_true.push_back(truth);
    y_pred.push_back(pred);
}

ForecastDump make_forecast_dump(const models::Forecaster& model, const pipeline::WindowSet& windows,
                                const pipeline::ScalerParams& scaler, std::span<const double> prices, DumpMeta meta,
                                std::size_t batch_size) {
    const std::size_t horizon = windows.horizon();
    const std::size_t per_window = windows.lookback() * windows.n_features();
    if (prices.size() != windows.matrix().rows()) throw ShapeError("price axis does not match the feature matrix");
    meta.horizon = horizon;
    ForecastDump dump;
    dump.meta = std::move(meta);
    std::vector<std::size_t> ids;
    std::vector<double> inputs;
    for (std::size_t first = 0; first < windows.size(); first += batch_size) {
        const std::size_t n = std::min(batch_size, windows.size() - first);
        ids.resize(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = first + i;
        inputs.resize(n * per_window);
        windows.gather_inputs(ids, inputs);
        const auto scaled = models::forecast(model, inputs, n);
        const auto pred = pipeline::invert_prices(scaled, scaler);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t h = 0; h < horizon; ++h) {
                dump.push(static_cast<std::int64_t>(ids[i]), static_cast<std::int64_t>(h + 1),
                          windows.target_timestamp(ids[i], h), prices[windows.target_row(ids[i], h)],
                          pred[i * horizon + h]);
            }
        }
    }
    return dump;
}

ForecastDump naive_forecast_dump(std::span<const double> prices, MarketTime start, std::size_t lag,
                                 std::size_t horizon, DumpMeta meta) {
    if (prices.size() <= lag) throw SeriesTooShort("naive forecast needs more than `lag` points");
    if (horizon == 0) throw ConfigError("naive forecast horizon must be positive");
    meta.horizon = horizon;
    ForecastDump dump;
    dump.meta = std::move(meta);
    for (std::size_t t = lag; t < prices.size(); ++t) {
        const std::size_t k = (t - lag) / horizon;
        const std::size_t s = (t - lag) % horizon + 1;
        dump.push(static_cast<std::int64_t>(k), static_cast<std::int64_t>(s),
                  start + kHalfHour * static_cast<long>(t), prices[t], prices[t - lag]);
    }
    return dump;
}

void write_dump(const std::filesystem::path& path, const ForecastDump& dump) {
    io::ColumnarTable table;
    table.add_int64("window_id", dump.window_id);
    table.add_int64("step", dump.step);
    std::vector<std::int64_t> ts;
    ts.reserve(dump.size());
    for (auto t : dump.target_timestamp) ts.push_back(epoch_seconds(t));
    table.add_int64("target_timestamp", std::move(ts));
    table.add_float64("y_true", dump.y_true);
    table.add_float64("y_pred", dump.y_pred);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    io::write_columnar(path, table);
    const nlohmann::json meta{{"region", dump.meta.region}, {"setting", dump.meta.setting},
                              {"family", dump.meta.family}, {"seed", dump.meta.seed},
                              {"horizon", dump.meta.horizon}, {"rows", dump.size()}};
    io::write_text_atomic(path.string() + ".json", meta.dump(2));
}

ForecastDump read_dump(const std::filesystem::path& path) {
    const auto meta = nlohmann::json::parse(io::read_text(path.string() + ".json"));
    const auto table = io::read_columnar(path);
    ForecastDump dump;
    dump.meta = DumpMeta{meta.at("region"), meta.at("setting"), meta.at("family"), meta.at("seed"), meta.at("horizon")};
    dump.window_id = table.int64("window_id");
    dump.step = table.int64("step");
    for (auto s : table.int64("target_timestamp")) dump.target_timestamp.push_back(from_epoch_seconds(s));
    dump.y_true = table.float64("y_true");
    dump.y_pred = table.float64("y_pred");
    return dump;
}

}  // namespace epf::evaluation
