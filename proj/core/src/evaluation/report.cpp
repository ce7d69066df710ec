#include "epf/evaluation/report.hpp"

#include <nlohmann/json.hpp>

#include "epf/error.hpp"

namespace epf::evaluation {

MetricSet mean_of(const std::vector<MetricSet>& sets) {
    if (sets.empty()) throw EmptyDump("no per-seed metrics to average");
    MetricSet m;
    for (const auto& s : sets) {
        m.mae += s.mae;
        m.rmse += s.rmse;
        m.smape += s.smape;
        m.rmae += s.rmae;
        m.mda += s.mda;
    }
    const double n = static_cast<double>(sets.size());
    m.mae /= n;
    m.rmse /= n;
    m.smape /= n;
    m.rmae /= n;
    m.mda /= n;
    return m;
}

MetricReport aggregate(std::vector<MetricSet> per_seed) {
    MetricReport r;
    r.mean = mean_of(per_seed);
    r.per_seed = std::move(per_seed);
    return r;
}

SubsetReport subset_report(const ForecastDump& dump, const SubsetMasks& masks) {
    return SubsetReport{subset_metrics(dump, masks.extreme), subset_metrics(dump, masks.upper_tail),
                        subset_metrics(dump, masks.lower_tail), subset_metrics(dump, masks.negative)};
}

std::optional<PointMetrics> mean_of(const std::vector<std::optional<PointMetrics>>& values) {
    if (values.empty()) return std::nullopt;
    PointMetrics m;
    for (const auto& v : values) {
        if (!v) return std::nullopt;
        m.mae += v->mae;
        m.rmse += v->rmse;
        m.smape += v->smape;
    }
    const double n = static_cast<double>(values.size());
    return PointMetrics{m.mae / n, m.rmse / n, m.smape / n};
}

SubsetReport mean_of(const std::vector<SubsetReport>& reports) {
    auto column = [&](auto member) {
        std::vector<std::optional<PointMetrics>> v;
        for (const auto& r : reports) v.push_back(r.*member);
        return mean_of(v);
    };
    return SubsetReport{column(&SubsetReport::extreme), column(&SubsetReport::upper_tail),
                        column(&SubsetReport::lower_tail), column(&SubsetReport::negative)};
}

DumpEvaluation evaluate_dump(const ForecastDump& dump, const NaiveBenchmark& bench, const SubsetMasks& masks) {
    return DumpEvaluation{evaluate(dump, bench), subset_report(dump, masks), intraday_profile(dump)};
}

namespace {

template <class T>
nlohmann::json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const PointMetrics& m) { j = {{"mae", m.mae}, {"rmse", m.rmse}, {"smape", m.smape}}; }

void from_json(const nlohmann::json& j, PointMetrics& m) {
    j.at("mae").get_to(m.mae);
    j.at("rmse").get_to(m.rmse);
    j.at("smape").get_to(m.smape);
}

void to_json(nlohmann::json& j, const MetricSet& m) {
    j = {{"mae", m.mae}, {"rmse", m.rmse}, {"smape", m.smape}, {"rmae", m.rmae}, {"mda", m.mda}};
}

void from_json(const nlohmann::json& j, MetricSet& m) {
    j.at("mae").get_to(m.mae);
    j.at("rmse").get_to(m.rmse);
    j.at("smape").get_to(m.smape);
    j.at("rmae").get_to(m.rmae);
    j.at("mda").get_to(m.mda);
}

void to_json(nlohmann::json& j, const MetricReport& r) { j = {{"mean", r.mean}, {"per_seed", r.per_seed}}; }

void from_json(const nlohmann::json& j, MetricReport& r) {
    j.at("mean").get_to(r.mean);
    j.at("per_seed").get_to(r.per_seed);
}

void to_json(nlohmann::json& j, const SubsetReport& r) {
    j = {{"extreme", optional_json(r.extreme)},
         {"upper_tail", optional_json(r.upper_tail)},
         {"lower_tail", optional_json(r.lower_tail)},
         {"negative", optional_json(r.negative)}};
}

void from_json(const nlohmann::json& j, SubsetReport& r) {
    r.extreme = optional_from<PointMetrics>(j, "extreme");
    r.upper_tail = optional_from<PointMetrics>(j, "upper_tail");
    r.lower_tail = optional_from<PointMetrics>(j, "lower_tail");
    r.negative = optional_from<PointMetrics>(j, "negative");
}

void to_json(nlohmann::json& j, const IntradayProfile& p) {
    j = nlohmann::json::array();
    for (std::size_t k = 0; k < p.intervals.size(); ++k) {
        const auto& s = p.intervals[k];
        j.push_back({{"interval", k},
                     {"count", s.count},
                     {"metrics", optional_json(s.point)},
                     {"pairs", s.pair_count},
                     {"mda", optional_json(s.mda)}});
    }
}

void from_json(const nlohmann::json& j, IntradayProfile& p) {
    if (!j.is_array() || j.size() != p.intervals.size()) throw FormatError("intraday profile needs 48 entries");
    for (std::size_t k = 0; k < p.intervals.size(); ++k) {
        const auto& e = j[k];
        auto& s = p.intervals[k];
        e.at("count").get_to(s.count);
        e.at("pairs").get_to(s.pair_count);
        s.point = optional_from<PointMetrics>(e, "metrics");
        s.mda = optional_from<double>(e, "mda");
    }
}

void to_json(nlohmann::json& j, const DiurnalDiagnostics& d) {
    j = nlohmann::json::array();
    for (std::size_t k = 0; k < d.intervals.size(); ++k) {
        const auto& r = d.intervals[k];
        j.push_back({{"interval", k},
                     {"price_change_std", r.price_change_std},
                     {"mean_price", r.mean_price},
                     {"pct_negative", r.pct_negative},
                     {"pct_directional_shift", r.pct_directional_shift}});
    }
}

void from_json(const nlohmann::json& j, DiurnalDiagnostics& d) {
    if (!j.is_array() || j.size() != d.intervals.size()) throw FormatError("diurnal diagnostics need 48 entries");
    for (std::size_t k = 0; k < d.intervals.size(); ++k) {
        auto& r = d.intervals[k];
        j[k].at("price_change_std").get_to(r.price_change_std);
        j[k].at("mean_price").get_to(r.mean_price);
        j[k].at("pct_negative").get_to(r.pct_negative);
        j[k].at("pct_directional_shift").get_to(r.pct_directional_shift);
    }
}

void from_json(const nlohmann::json& j, NaiveBenchmark& b) {
    j.at("lag").get_to(b.lag);
    j.at("length").get_to(b.length);
    j.at("mae").get_to(b.mae);
}

void to_json(nlohmann::json& j, const NaiveBenchmark& b) {
    j = {{"lag", b.lag}, {"length", b.length}, {"mae", b.mae}};
}

}  // namespace epf::evaluation
