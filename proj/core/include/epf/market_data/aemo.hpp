#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epf/market_data/series.hpp"

namespace epf {

// Earliest month covered by the public MMSDM dispatch-price archive.
inline constexpr Date kArchiveFirstDay{std::chrono::year{2009}, std::chrono::July,
                                       std::chrono::day{1}};

// Byte-level source of archive files. `get` returns nullopt when the resource
// does not exist (HTTP 404) and throws NetworkUnavailable when the host cannot
// be reached at all.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::optional<std::string> get(const std::string& url) = 0;
};

// HTTPS transport backed by libcurl.
class CurlTransport final : public Transport {
public:
    CurlTransport();
    ~CurlTransport() override;
    std::optional<std::string> get(const std::string& url) override;
};

// Candidate archive URLs for one month of DISPATCHPRICE data, most likely first.
[[nodiscard]] std::vector<std::string> dispatch_price_urls(std::chrono::year_month ym);

struct DispatchPriceRow {
    MarketTime settlement;  // interval *end*, as AEMO reports it
    double rrp;
};

// Parses an AEMO MMS CSV report (C = comment, I = header, D = data rows) and
// returns the DISPATCH.PRICE rows for `region` with INTERVENTION = 0.
[[nodiscard]] std::vector<DispatchPriceRow> parse_dispatch_price_csv(std::string_view csv,
                                                                     Region region);

// Entries (name, contents) of a zip archive. Supports stored and deflated members.
[[nodiscard]] std::vector<std::pair<std::string, std::string>> extract_zip(std::string_view zip);

// Cache layout: <cache_dir>/<REGION>/<YYYY-MM>.epfc, one columnar file per
// (region, month) with schema (timestamp: int64 epoch seconds, rrp: float64).
// Timestamps are interval starts in market time.
[[nodiscard]] std::filesystem::path cache_file(const std::filesystem::path& cache_dir,
                                               Region region, std::chrono::year_month ym);

void write_month_cache(const std::filesystem::path& file, const RawPriceSeries& month);
[[nodiscard]] RawPriceSeries read_month_cache(const std::filesystem::path& file, Region region);

// Gap-free five-minute RRP series covering [start_date 00:00, end_date 24:00).
// Months missing from the cache are downloaded through `transport` and written
// back; fully cached ranges never touch the transport.
[[nodiscard]] RawPriceSeries fetch_rrp(Region region, const Date& start_date, const Date& end_date,
                                       const std::filesystem::path& cache_dir,
                                       Transport& transport);

// Convenience overload using CurlTransport.
[[nodiscard]] RawPriceSeries fetch_rrp(Region region, const Date& start_date, const Date& end_date,
                                       const std::filesystem::path& cache_dir);

}  // namespace epf
