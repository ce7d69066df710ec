#include "epf/market_data/aemo.hpp"

#include <curl/curl.h>
#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <mutex>

#include "epf/io/columnar.hpp"

namespace epf {

namespace {

// ---- CSV ------------------------------------------------------------------

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

MarketTime parse_settlement(std::string text) {
    std::replace(text.begin(), text.end(), '/', '-');
    return parse_market_time(text);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError("malformed number '" + s + "' in MMS CSV");
    }
    return v;
}

// ---- zip ------------------------------------------------------------------

std::uint32_t u32_at(std::string_view b, std::size_t off) {
    if (off + 4 > b.size()) throw FormatError("zip: truncated");
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24;
}

std::uint16_t u16_at(std::string_view b, std::size_t off) {
    if (off + 2 > b.size()) throw FormatError("zip: truncated");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                      static_cast<unsigned char>(b[off + 1]) << 8);
}

std::string inflate_raw(std::string_view compressed, std::size_t expected) {
    std::string out(expected, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("zip: inflateInit failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected) throw FormatError("zip: corrupt deflate stream");
    return out;
}

// ---- curl -----------------------------------------------------------------

std::size_t append_body(char* data, std::size_t size, std::size_t n, void* user) {
    static_cast<std::string*>(user)->append(data, size * n);
    return size * n;
}

std::once_flag curl_init_once;

std::chrono::year_month year_month_of(const Date& d) { return d.year() / d.month(); }

}  // namespace

// ---------------------------------------------------------------------------

CurlTransport::CurlTransport() {
    std::call_once(curl_init_once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

CurlTransport::~CurlTransport() = default;

std::optional<std::string> CurlTransport::get(const std::string& url) {
    std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
    if (!curl) throw NetworkUnavailable("curl initialisation failed");
    std::string body;
    curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, &append_body);
    curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &body);
    curl_easy_setopt(curl.get(), CURLOPT_CONNECTTIMEOUT, 20L);
    curl_easy_setopt(curl.get(), CURLOPT_USERAGENT, "epf-bench/1.0");
    const CURLcode rc = curl_easy_perform(curl.get());
    if (rc != CURLE_OK) {
        throw NetworkUnavailable("GET " + url + ": " + curl_easy_strerror(rc));
    }
    long status = 0;
    curl_easy_getinfo(curl.get(), CURLINFO_RESPONSE_CODE, &status);
    if (status == 404) return std::nullopt;
    if (status != 200) {
        throw NetworkUnavailable("GET " + url + ": HTTP " + std::to_string(status));
    }
    return body;
}

std::vector<std::string> dispatch_price_urls(std::chrono::year_month ym) {
    char y[8], m[8];
    std::snprintf(y, sizeof(y), "%04d", static_cast<int>(ym.year()));
    std::snprintf(m, sizeof(m), "%02u", static_cast<unsigned>(ym.month()));
    const std::string base = std::string("https://nemweb.com.au/Data_Archive/Wholesale_Electricity/MMSDM/") +
                             y + "/MMSDM_" + y + "_" + m +
                             "/MMSDM_Historical_Data_SQLLoader/DATA/";
    return {
        base + "PUBLIC_DVD_DISPATCHPRICE_" + y + m + "010000.zip",
        base + "PUBLIC_ARCHIVE%23DISPATCHPRICE%23FILE01%23" + y + m + "010000.zip",
    };
}

std::vector<DispatchPriceRow> parse_dispatch_price_csv(std::string_view csv, Region region) {
    const std::string region_id = aemo_region_id(region);
    std::vector<DispatchPriceRow> rows;
    bool in_price_section = false;
    int col_date = -1, col_region = -1, col_intervention = -1, col_rrp = -1;

    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t eol = csv.find('\n', pos);
        if (eol == std::string_view::npos) eol = csv.size();
        const std::string_view line = csv.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;

        const char kind = line.front();
        if (kind == 'C') continue;
        if (kind != 'I' && kind != 'D') continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 4) throw FormatError("short MMS CSV row");

        if (kind == 'I') {
            in_price_section = fields[1] == "DISPATCH" && fields[2] == "PRICE";
            if (!in_price_section) continue;
            col_date = col_region = col_intervention = col_rrp = -1;
            for (std::size_t i = 4; i < fields.size(); ++i) {
                const auto& name = fields[i];
                if (name == "SETTLEMENTDATE") col_date = static_cast<int>(i);
                else if (name == "REGIONID") col_region = static_cast<int>(i);
                else if (name == "INTERVENTION") col_intervention = static_cast<int>(i);
                else if (name == "RRP") col_rrp = static_cast<int>(i);
            }
            if (col_date < 0 || col_region < 0 || col_rrp < 0) {
                throw FormatError("DISPATCH.PRICE header lacks SETTLEMENTDATE/REGIONID/RRP");
            }
            continue;
        }
        if (!in_price_section) continue;
        const auto max_col = static_cast<std::size_t>(std::max({col_date, col_region, col_rrp, col_intervention}));
        if (fields.size() <= max_col) throw FormatError("MMS CSV data row shorter than its header");
        if (fields[static_cast<std::size_t>(col_region)] != region_id) continue;
        if (col_intervention >= 0 && fields[static_cast<std::size_t>(col_intervention)] != "0") continue;
        rows.push_back({parse_settlement(fields[static_cast<std::size_t>(col_date)]),
                        parse_double(fields[static_cast<std::size_t>(col_rrp)])});
    }
    return rows;
}

std::vector<std::pair<std::string, std::string>> extract_zip(std::string_view zip) {
    constexpr std::uint32_t kEndSig = 0x06054b50, kCentralSig = 0x02014b50, kLocalSig = 0x04034b50;
    if (zip.size() < 22) throw FormatError("zip: too small");
    std::size_t eocd = std::string_view::npos;
    for (std::size_t i = zip.size() - 22 + 1; i-- > 0;) {
        if (u32_at(zip, i) == kEndSig) {
            eocd = i;
            break;
        }
        if (zip.size() - i > 22 + 65535) break;
    }
    if (eocd == std::string_view::npos) throw FormatError("zip: no end-of-central-directory record");

    const std::uint16_t n_entries = u16_at(zip, eocd + 10);
    std::size_t cd = u32_at(zip, eocd + 16);
    std::vector<std::pair<std::string, std::string>> out;
    for (std::uint16_t e = 0; e < n_entries; ++e) {
        if (u32_at(zip, cd) != kCentralSig) throw FormatError("zip: bad central directory");
        const std::uint16_t method = u16_at(zip, cd + 10);
        const std::uint32_t csize = u32_at(zip, cd + 20);
        const std::uint32_t usize = u32_at(zip, cd + 24);
        const std::uint16_t name_len = u16_at(zip, cd + 28);
        const std::uint16_t extra_len = u16_at(zip, cd + 30);
        const std::uint16_t comment_len = u16_at(zip, cd + 32);
        const std::uint32_t local = u32_at(zip, cd + 42);
        std::string name(zip.substr(cd + 46, name_len));
        cd += 46u + name_len + extra_len + comment_len;

        if (u32_at(zip, local) != kLocalSig) throw FormatError("zip: bad local header");
        const std::size_t data = local + 30u + u16_at(zip, local + 26) + u16_at(zip, local + 28);
        if (data + csize > zip.size()) throw FormatError("zip: member extends past end");
        const auto payload = zip.substr(data, csize);
        if (method == 0) {
            out.emplace_back(std::move(name), std::string(payload));
        } else if (method == 8) {
            out.emplace_back(std::move(name), inflate_raw(payload, usize));
        } else {
            throw FormatError("zip: unsupported compression method " + std::to_string(method));
        }
    }
    return out;
}

std::filesystem::path cache_file(const std::filesystem::path& cache_dir, Region region,
                                 std::chrono::year_month ym) {
    char name[16];
    std::snprintf(name, sizeof(name), "%04d-%02u.epfc", static_cast<int>(ym.year()),
                  static_cast<unsigned>(ym.month()));
    return cache_dir / std::string(to_string(region)) / name;
}

void write_month_cache(const std::filesystem::path& file, const RawPriceSeries& month) {
    io::ColumnarTable table;
    std::vector<std::int64_t> ts(month.size());
    for (std::size_t i = 0; i < month.size(); ++i) ts[i] = epoch_seconds(month.timestamp(i));
    table.add_int64("timestamp", std::move(ts));
    table.add_float64("rrp", std::vector<double>(month.prices().begin(), month.prices().end()));
    io::write_columnar(file, table);
}

RawPriceSeries read_month_cache(const std::filesystem::path& file, Region region) {
    const auto table = io::read_columnar(file);
    const auto& ts = table.int64("timestamp");
    const auto& rrp = table.float64("rrp");
    if (ts.empty()) throw IntegrityError(file.string() + ": empty cache file");
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (ts[i] - ts[i - 1] != 300) {
            throw IntegrityError(file.string() + ": cached timestamps are not a 5-minute grid");
        }
    }
    return RawPriceSeries(region, from_epoch_seconds(ts.front()), rrp);
}

namespace {

RawPriceSeries download_month(Region region, std::chrono::year_month ym, Transport& transport) {
    std::optional<std::string> body;
    for (const auto& url : dispatch_price_urls(ym)) {
        body = transport.get(url);
        if (body) break;
    }
    if (!body) {
        throw RangeError("no DISPATCHPRICE archive for " + std::string(to_string(region)) + " " +
                         format_date(ym / 1));
    }

    std::vector<DispatchPriceRow> rows;
    const bool is_zip = body->size() >= 4 && u32_at(*body, 0) == 0x04034b50;
    if (is_zip) {
        for (const auto& [name, contents] : extract_zip(*body)) {
            auto part = parse_dispatch_price_csv(contents, region);
            rows.insert(rows.end(), part.begin(), part.end());
        }
    } else {
        rows = parse_dispatch_price_csv(*body, region);
    }

    const MarketTime month_start = start_of(ym / 1);
    const auto days = static_cast<std::size_t>(days_inclusive(ym / 1, ym / std::chrono::last));
    const std::size_t n = days * kIntervalsPerDay5;
    std::vector<double> prices(n, 0.0);
    std::vector<bool> seen(n, false);
    for (const auto& row : rows) {
        const auto offset = (row.settlement - kFiveMinutes - month_start).count();
        if (offset < 0 || offset % 300 != 0 || static_cast<std::size_t>(offset / 300) >= n) continue;
        const auto idx = static_cast<std::size_t>(offset / 300);
        if (seen[idx]) {
            throw IntegrityError("duplicate settlement interval " +
                                 format_market_time(row.settlement) + " for " +
                                 std::string(to_string(region)));
        }
        seen[idx] = true;
        prices[idx] = row.rrp;
    }
    if (auto gap = std::find(seen.begin(), seen.end(), false); gap != seen.end()) {
        const auto idx = static_cast<std::size_t>(gap - seen.begin());
        throw IntegrityError("missing interval starting " +
                             format_market_time(month_start + kFiveMinutes * static_cast<long>(idx)) +
                             " for " + std::string(to_string(region)));
    }
    return RawPriceSeries(region, month_start, std::move(prices));
}

}  // namespace

RawPriceSeries fetch_rrp(Region region, const Date& start_date, const Date& end_date,
                         const std::filesystem::path& cache_dir, Transport& transport) {
    using namespace std::chrono;
    if (!start_date.ok() || !end_date.ok() || sys_days{end_date} < sys_days{start_date}) {
        throw RangeError("start date must not be after end date");
    }
    if (sys_days{start_date} < sys_days{kArchiveFirstDay}) {
        throw RangeError("requested range starts before " + format_date(kArchiveFirstDay) +
                         ", the first archived month");
    }

    std::vector<double> prices;
    prices.reserve(static_cast<std::size_t>(days_inclusive(start_date, end_date)) * kIntervalsPerDay5);
    const MarketTime range_start = start_of(start_date);
    const MarketTime range_end = start_of(Date{sys_days{end_date} + days{1}});

    for (year_month ym = year_month_of(start_date); ym <= year_month_of(end_date); ym += months{1}) {
        const auto file = cache_file(cache_dir, region, ym);
        RawPriceSeries month = std::filesystem::exists(file)
                                   ? read_month_cache(file, region)
                                   : [&] {
                                         auto fresh = download_month(region, ym, transport);
                                         write_month_cache(file, fresh);
                                         return fresh;
                                     }();
        if (month.start() != start_of(ym / 1)) {
            throw IntegrityError(file.string() + ": month does not start at its first interval");
        }
        const MarketTime from = std::max(range_start, month.start());
        const MarketTime to = std::min(range_end, month.end());
        if (to <= from) continue;
        const auto first = month.index_of(from);
        const auto last = month.index_of(to);
        prices.insert(prices.end(), month.prices().begin() + static_cast<std::ptrdiff_t>(first),
                      month.prices().begin() + static_cast<std::ptrdiff_t>(last));
    }

    RawPriceSeries series(region, range_start, std::move(prices));
    if (series.end() != range_end) {
        throw IntegrityError("assembled series for " + std::string(to_string(region)) +
                             " does not cover the requested range");
    }
    return series;
}

RawPriceSeries fetch_rrp(Region region, const Date& start_date, const Date& end_date,
                         const std::filesystem::path& cache_dir) {
    CurlTransport transport;
    return fetch_rrp(region, start_date, end_date, cache_dir, transport);
}

}  // namespace epf
