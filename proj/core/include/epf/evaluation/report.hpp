#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "epf/evaluation/intraday.hpp"
#include "epf/evaluation/metrics.hpp"

namespace epf::evaluation {

// Headline metrics of one (region, setting, family) cell across seeds.
struct MetricReport {
    std::vector<MetricSet> per_seed;
    MetricSet mean;
};

[[nodiscard]] MetricSet mean_of(const std::vector<MetricSet>& sets);
[[nodiscard]] MetricReport aggregate(std::vector<MetricSet> per_seed);

// Extreme and negative price subsets, each absent when empty.
struct SubsetReport {
    std::optional<PointMetrics> extreme;
    std::optional<PointMetrics> upper_tail;
    std::optional<PointMetrics> lower_tail;
    std::optional<PointMetrics> negative;
};

[[nodiscard]] SubsetReport subset_report(const ForecastDump& dump, const SubsetMasks& masks);

// Seed mean of subset metrics; a subset stays absent if any seed lacks it.
[[nodiscard]] SubsetReport mean_of(const std::vector<SubsetReport>& reports);
[[nodiscard]] std::optional<PointMetrics> mean_of(const std::vector<std::optional<PointMetrics>>& values);

// Everything computed for one dump.
struct DumpEvaluation {
    MetricSet metrics;
    SubsetReport subsets;
    IntradayProfile intraday;
};

[[nodiscard]] DumpEvaluation evaluate_dump(const ForecastDump& dump, const NaiveBenchmark& bench,
                                           const SubsetMasks& masks);

void to_json(nlohmann::json& j, const PointMetrics& m);
void from_json(const nlohmann::json& j, PointMetrics& m);
void to_json(nlohmann::json& j, const MetricSet& m);
void from_json(const nlohmann::json& j, MetricSet& m);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);
void to_json(nlohmann::json& j, const SubsetReport& r);
void from_json(const nlohmann::json& j, SubsetReport& r);
void to_json(nlohmann::json& j, const IntradayProfile& p);
void from_json(const nlohmann::json& j, IntradayProfile& p);
void to_json(nlohmann::json& j, const DiurnalDiagnostics& d);
void from_json(const nlohmann::json& j, DiurnalDiagnostics& d);
void to_json(nlohmann::json& j, const NaiveBenchmark& b);
void from_json(const nlohmann::json& j, NaiveBenchmark& b);

}  // namespace epf::evaluation
