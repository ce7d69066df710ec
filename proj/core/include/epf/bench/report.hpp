#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "epf/evaluation/report.hpp"
#include "epf/market_data/region.hpp"
#include "epf/models/config.hpp"

namespace epf::bench {

// Evaluated (region, setting, family) cell.
struct CellResult {
    Region region = Region::QLD;
    std::string setting;
    models::ModelFamily family = models::ModelFamily::DLINEAR;
    evaluation::MetricReport overall;
    evaluation::SubsetReport subsets;
    evaluation::IntradayProfile intraday;  // seed mean per slot
    std::vector<std::string> dumps;        // provenance, relative paths
};

struct RegionDiagnostics {
    Region region = Region::QLD;
    std::string setting;
    evaluation::NaiveBenchmark benchmark;
    evaluation::DiurnalDiagnostics diurnal;
};

struct ReportInput {
    std::string config_hash;
    std::vector<Region> regions;          // row order
    std::vector<std::string> settings;    // column-block order
    std::vector<models::ModelFamily> families;
    std::vector<CellResult> cells;
    std::vector<RegionDiagnostics> diagnostics;
};

enum class Flag { None, Best, Second };

// Flags for one group of values: Best for every value equal to the best
// displayed (3-decimal) value, Second for values equal to the next distinct
// one. Lower is better unless `higher_is_better`.
[[nodiscard]] std::vector<Flag> rank_flags(const std::vector<double>& values, bool higher_is_better);

// Seed mean of per-slot metrics; a slot is absent if any seed lacks it.
[[nodiscard]] evaluation::IntradayProfile mean_profile(const std::vector<evaluation::IntradayProfile>& profiles);

// Writes the overall table (markdown + CSV), the extreme and negative subset
// tables, per-slot plot data (CSV) with SVG renderings, and summary.json into
// `dir`. Returns the written file names. NothingToReport without cells.
std::vector<std::string> emit_report(const ReportInput& input, const std::filesystem::path& dir);

}  // namespace epf::bench
