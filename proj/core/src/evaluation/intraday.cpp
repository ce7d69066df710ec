#include "epf/evaluation/intraday.hpp"

#include <cmath>

#include "epf/error.hpp"

namespace epf::evaluation {

IntradayProfile intraday_profile(const ForecastDump& dump) {
    IntradayProfile profile;
    std::array<std::vector<double>, kIntervals> truth, pred;
    std::array<std::size_t, kIntervals> hits{};
    for (std::size_t i = 0; i < dump.size(); ++i) {
        const auto k = static_cast<std::size_t>(half_hour_of_day(dump.target_timestamp[i]));
        truth[k].push_back(dump.y_true[i]);
        pred[k].push_back(dump.y_pred[i]);
        if (i > 0 && dump.window_id[i] == dump.window_id[i - 1]) {
            ++profile.intervals[k].pair_count;
            hits[k] += direction(dump.y_pred[i] - dump.y_pred[i - 1]) ==
                       direction(dump.y_true[i] - dump.y_true[i - 1]);
        }
    }
    for (std::size_t k = 0; k < kIntervals; ++k) {
        auto& slot = profile.intervals[k];
        slot.count = truth[k].size();
        if (slot.count > 0) slot.point = point_metrics(truth[k], pred[k]);
        if (slot.pair_count > 0)
            slot.mda = 100.0 * static_cast<double>(hits[k]) / static_cast<double>(slot.pair_count);
    }
    return profile;
}

DiurnalDiagnostics diurnal_diagnostics(const HalfHourlySeries& series) {
    if (series.size() < 2 * static_cast<std::size_t>(kIntervals))
        throw SeriesTooShort("diurnal diagnostics need at least two days of half-hourly prices");
    const auto y = series.prices();

    struct Acc {
        std::size_t n = 0, neg = 0, shifts = 0, sn = 0;
        double sum = 0.0;
        std::vector<double> deltas;
    };
    std::array<Acc, kIntervals> acc{};
    for (std::size_t t = 0; t < y.size(); ++t) {
        auto& a = acc[static_cast<std::size_t>(half_hour_of_day(series.timestamp(t)))];
        ++a.n;
        a.sum += y[t];
        a.neg += y[t] < 0.0;
        if (t >= 1) {
            a.deltas.push_back(y[t] - y[t - 1]);
        }
        if (t >= 2) {
            ++a.sn;
            a.shifts += direction(y[t] - y[t - 1]) != direction(y[t - 1] - y[t - 2]);
        }
    }

    DiurnalDiagnostics out;
    for (std::size_t k = 0; k < kIntervals; ++k) {
        const auto& a = acc[k];
        auto& row = out.intervals[k];
        row.mean_price = a.sum / static_cast<double>(a.n);
        row.pct_negative = 100.0 * static_cast<double>(a.neg) / static_cast<double>(a.n);
        if (!a.deltas.empty()) {
            const double dn = static_cast<double>(a.deltas.size());
            double m = 0.0, ss = 0.0;
            for (double d : a.deltas) m += d;
            m /= dn;
            for (double d : a.deltas) ss += (d - m) * (d - m);
            row.price_change_std = std::sqrt(ss / dn);
        }
        if (a.sn > 0) row.pct_directional_shift = 100.0 * static_cast<double>(a.shifts) / static_cast<double>(a.sn);
    }
    return out;
}

}  // namespace epf::evaluation
