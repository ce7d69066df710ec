#include "epf/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "epf/error.hpp"

namespace epf::evaluation {

namespace {

struct Accumulator {
    double abs = 0.0, sq = 0.0, sym = 0.0;
    std::size_t n = 0;

    void add(double y, double yhat) {
        const double e = yhat - y;
        abs += std::abs(e);
        sq += e * e;
        const double denom = std::abs(y) + std::abs(yhat);
        if (denom > 0.0) sym += 2.0 * std::abs(e) / denom;
        ++n;
    }

    [[nodiscard]] PointMetrics finish() const {
        if (n == 0) throw EmptyDump("no rows to evaluate");
        const double dn = static_cast<double>(n);
        return PointMetrics{abs / dn, std::sqrt(sq / dn), 100.0 * sym / dn};
    }
};

}  // namespace

PointMetrics point_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw ShapeError("point_metrics: length mismatch");
    Accumulator acc;
    for (std::size_t i = 0; i < y_true.size(); ++i) acc.add(y_true[i], y_pred[i]);
    return acc.finish();
}

PointMetrics point_metrics(const ForecastDump& dump) { return point_metrics(dump.y_true, dump.y_pred); }

PointMetrics point_metrics(const ForecastDump& dump, const std::vector<bool>& mask) {
    if (mask.size() != dump.size()) throw ShapeError("point_metrics: mask length mismatch");
    Accumulator acc;
    for (std::size_t i = 0; i < dump.size(); ++i)
        if (mask[i]) acc.add(dump.y_true[i], dump.y_pred[i]);
    return acc.finish();
}

NaiveBenchmark seasonal_naive(std::span<const double> prices, std::size_t lag) {
    if (lag == 0) throw ConfigError("seasonal lag must be positive");
    if (prices.size() <= lag) {
        throw SeriesTooShort("seasonal naive needs more than " + std::to_string(lag) + " points, got " +
                             std::to_string(prices.size()));
    }
    double sum = 0.0;
    for (std::size_t t = lag; t < prices.size(); ++t) sum += std::abs(prices[t] - prices[t - lag]);
    NaiveBenchmark b{lag, prices.size(), sum / static_cast<double>(prices.size() - lag)};
    if (b.mae == 0.0) throw ZeroBenchmark("seasonal naive MAE is zero; the series repeats with the seasonal lag");
    return b;
}

double rmae(const ForecastDump& dump, const NaiveBenchmark& bench) {
    if (!(bench.mae > 0.0)) throw ZeroBenchmark("benchmark MAE must be positive");
    return point_metrics(dump).mae / bench.mae;
}

int direction(double delta) { return (delta > 0.0) - (delta < 0.0); }

double mda(const ForecastDump& dump) {
    if (dump.meta.horizon < 2) throw HorizonTooShort("directional accuracy needs at least two steps");
    if (dump.empty()) throw EmptyDump("no rows to evaluate");
    double total = 0.0;
    std::size_t windows = 0;
    std::size_t i = 0;
    while (i < dump.size()) {
        std::size_t j = i + 1;
        std::size_t hits = 0;
        for (; j < dump.size() && dump.window_id[j] == dump.window_id[i]; ++j) {
            hits += direction(dump.y_pred[j] - dump.y_pred[j - 1]) == direction(dump.y_true[j] - dump.y_true[j - 1]);
        }
        const std::size_t pairs = j - i - 1;
        if (pairs > 0) {
            total += 100.0 * static_cast<double>(hits) / static_cast<double>(pairs);
            ++windows;
        }
        i = j;
    }
    if (windows == 0) throw HorizonTooShort("no window holds two consecutive steps");
    return total / static_cast<double>(windows);
}

double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw EmptySeries("percentile of an empty set");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

SubsetMasks subset_masks(const ForecastDump& dump, std::span<const double> test_prices, double tail_percent) {
    SubsetMasks m;
    m.lower_threshold = percentile(test_prices, tail_percent);
    m.upper_threshold = percentile(test_prices, 100.0 - tail_percent);
    const std::size_t n = dump.size();
    m.upper_tail.resize(n);
    m.lower_tail.resize(n);
    m.extreme.resize(n);
    m.negative.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = dump.y_true[i];
        m.upper_tail[i] = y >= m.upper_threshold;
        m.lower_tail[i] = y <= m.lower_threshold;
        m.extreme[i] = m.upper_tail[i] || m.lower_tail[i];
        m.negative[i] = y < 0.0;
    }
    return m;
}

std::optional<PointMetrics> subset_metrics(const ForecastDump& dump, const std::vector<bool>& mask) {
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) return std::nullopt;
    return point_metrics(dump, mask);
}

MetricSet evaluate(const ForecastDump& dump, const NaiveBenchmark& bench) {
    const auto p = point_metrics(dump);
    return MetricSet{p.mae, p.rmse, p.smape, p.mae / bench.mae, mda(dump)};
}

}  // namespace epf::evaluation
