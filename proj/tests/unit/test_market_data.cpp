#include <gtest/gtest.h>

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "epf/error.hpp"
#include "epf/market_data/aemo.hpp"
#include "epf/market_data/calendar.hpp"
#include "epf/market_data/summary.hpp"
#include "epf/market_data/synthetic.hpp"

using namespace epf;
using namespace std::chrono;

namespace {

// Zeller's congruence, shifted so Monday = 0.
int zeller_monday0(int y, int m, int d) {
    if (m < 3) {
        m += 12;
        y -= 1;
    }
    const int K = y % 100, J = y / 100;
    const int h = (d + 13 * (m + 1) / 5 + K + K / 4 + J / 4 + 5 * J) % 7;  // 0 = Saturday
    return (h + 5) % 7;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("epf_md_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

void put16(std::string& s, std::uint16_t v) {
    s += static_cast<char>(v & 0xff);
    s += static_cast<char>(v >> 8);
}
void put32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::string raw_deflate(const std::string& data) {
    z_stream zs{};
    deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY);
    std::string out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

// Minimal single-pass zip writer; method 0 = stored, 8 = deflate.
std::string make_zip(const std::vector<std::pair<std::string, std::string>>& files, int method) {
    std::string body, central;
    for (const auto& [name, data] : files) {
        const auto crc = static_cast<std::uint32_t>(
            crc32(0, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
        const std::string payload = method == 8 ? raw_deflate(data) : data;
        const auto offset = static_cast<std::uint32_t>(body.size());
        put32(body, 0x04034b50);
        put16(body, 20);
        put16(body, 0);
        put16(body, static_cast<std::uint16_t>(method));
        put16(body, 0);
        put16(body, 0);
        put32(body, crc);
        put32(body, static_cast<std::uint32_t>(payload.size()));
        put32(body, static_cast<std::uint32_t>(data.size()));
        put16(body, static_cast<std::uint16_t>(name.size()));
        put16(body, 0);
        body += name + payload;

        put32(central, 0x02014b50);
        put16(central, 20);
        put16(central, 20);
        put16(central, 0);
        put16(central, static_cast<std::uint16_t>(method));
        put16(central, 0);
        put16(central, 0);
        put32(central, crc);
        put32(central, static_cast<std::uint32_t>(payload.size()));
        put32(central, static_cast<std::uint32_t>(data.size()));
        put16(central, static_cast<std::uint16_t>(name.size()));
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put32(central, 0);
        put32(central, offset);
        central += name;
    }
    std::string out = body + central;
    put32(out, 0x06054b50);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(files.size()));
    put16(out, static_cast<std::uint16_t>(files.size()));
    put32(out, static_cast<std::uint32_t>(central.size()));
    put32(out, static_cast<std::uint32_t>(body.size()));
    put16(out, 0);
    return out;
}

std::string two_digits(unsigned v) { return (v < 10 ? "0" : "") + std::to_string(v); }

// Price of the interval ending at `settlement` for a region, a closed form the
// tests can recompute.
double known_price(Region r, MarketTime settlement) {
    const auto k = epoch_seconds(settlement) / 300;
    return static_cast<double>(k % 1000) / 4.0 - 50.0 + static_cast<double>(static_cast<int>(r));
}

// One month of DISPATCH.PRICE rows for two regions, with a duplicate
// intervention row that must be ignored.
std::string month_csv(year_month ym) {
    std::string csv = "C,NEMP.WORLD,DVD_DISPATCHPRICE,AEMO,PUBLIC\n";
    csv += "I,DISPATCH,PRICE,5,SETTLEMENTDATE,RUNNO,REGIONID,DISPATCHINTERVAL,INTERVENTION,RRP,EEP\n";
    const MarketTime first = start_of(ym / 1);
    const auto n_days = days_inclusive(ym / 1, ym / last);
    for (long i = 1; i <= n_days * 288; ++i) {
        const MarketTime t = first + minutes{5} * i;
        const auto dp = floor<days>(t);
        const year_month_day ymd{dp};
        const hh_mm_ss hms{t - dp};
        const std::string stamp = "\"" + std::to_string(static_cast<int>(ymd.year())) + "/" +
                                  two_digits(static_cast<unsigned>(ymd.month())) + "/" +
                                  two_digits(static_cast<unsigned>(ymd.day())) + " " +
                                  two_digits(static_cast<unsigned>(hms.hours().count())) + ":" +
                                  two_digits(static_cast<unsigned>(hms.minutes().count())) + ":00\"";
        for (Region r : {Region::QLD, Region::NSW}) {
            char rrp[32];
            std::snprintf(rrp, sizeof rrp, "%.2f", known_price(r, t));
            csv += "D,DISPATCH,PRICE,5," + stamp + ",1," + aemo_region_id(r) + ",1,0," + rrp + ",0\n";
        }
        if (i == 7) csv += "D,DISPATCH,PRICE,5," + stamp + ",1," + aemo_region_id(Region::QLD) + ",1,1,9999,0\n";
    }
    csv += "C,\"END OF REPORT\",3\n";
    return csv;
}

class FakeArchive final : public Transport {
public:
    explicit FakeArchive(bool zipped) : zipped_(zipped) {}
    std::optional<std::string> get(const std::string& url) override {
        ++calls;
        // Only the first candidate URL is "hosted"; the rest 404.
        for (int y = 2009; y <= 2030; ++y)
            for (unsigned m = 1; m <= 12; ++m) {
                const year_month ym{year{y}, month{m}};
                if (url != dispatch_price_urls(ym).front()) continue;
                const auto csv = month_csv(ym);
                return zipped_ ? make_zip({{"PUBLIC_DVD_DISPATCHPRICE.CSV", csv}}, 8) : csv;
            }
        return std::nullopt;
    }
    int calls = 0;

private:
    bool zipped_;
};

class OfflineTransport final : public Transport {
public:
    std::optional<std::string> get(const std::string&) override { throw NetworkUnavailable("offline"); }
};

}  // namespace

TEST(Calendar, DayOfWeekMatchesZeller) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> day(0, 60000);
    for (int i = 0; i < 2000; ++i) {
        const sys_days d = sys_days{year{1950} / 1 / 1} + days{day(rng)};
        const year_month_day ymd{d};
        const auto f = calendar_fields(MarketTime{d} + hours{13});
        EXPECT_EQ(f.day_of_week, zeller_monday0(static_cast<int>(ymd.year()), static_cast<int>(unsigned(ymd.month())),
                                                static_cast<int>(unsigned(ymd.day()))));
        EXPECT_EQ(f.hour_of_day, 13);
    }
}

TEST(Calendar, KnownTimestamps) {
    const auto a = calendar_fields(parse_market_time("2025-01-01 00:00"));
    EXPECT_EQ(a.hour_of_day, 0);
    EXPECT_EQ(a.day_of_week, 2);
    EXPECT_EQ(a.day_of_month, 1);
    EXPECT_EQ(a.month_of_year, 1);
    const auto b = calendar_fields(parse_market_time("2023-12-31T23:30"));
    EXPECT_EQ(b.hour_of_day, 23);
    EXPECT_EQ(b.day_of_month, 31);
    EXPECT_EQ(b.month_of_year, 12);
    EXPECT_EQ(calendar_fields(parse_market_time("2024-03-05 10:00")).hour_of_day,
              calendar_fields(parse_market_time("2024-03-05 10:30")).hour_of_day);
    EXPECT_EQ(half_hour_of_day(parse_market_time("2024-03-05 16:00")), 32);
    EXPECT_EQ(half_hour_of_day(parse_market_time("2024-03-05 20:30")), 41);
}

TEST(Calendar, ParseFormatRoundTrip) {
    const auto t = parse_market_time("2024-02-29 17:35:00");
    EXPECT_EQ(format_market_time(t).substr(0, 16), "2024-02-29 17:35");
    EXPECT_EQ(format_date(parse_date("2025-06-30")), "2025-06-30");
    EXPECT_THROW((void)parse_date("2025-13-01"), Error);
    EXPECT_THROW((void)parse_date("garbage"), Error);
    EXPECT_EQ(days_inclusive(parse_date("2023-01-01"), parse_date("2025-06-30")), 912);
    EXPECT_EQ(days_inclusive(parse_date("2023-01-01"), parse_date("2023-01-01")), 1);
}

TEST(Region, ParseAndIds) {
    for (Region r : kAllRegions) EXPECT_EQ(parse_region(to_string(r)), r);
    EXPECT_EQ(parse_region("qld"), Region::QLD);
    EXPECT_EQ(aemo_region_id(Region::VIC), "VIC1");
    EXPECT_THROW((void)parse_region("WA"), ConfigError);
}

TEST(Series, IntegrityAndIndexing) {
    const auto t0 = parse_market_time("2023-01-01");
    EXPECT_THROW(RawPriceSeries(Region::QLD, t0, {1.0, 17500.01}), IntegrityError);
    EXPECT_THROW(RawPriceSeries(Region::QLD, t0, {-1000.5}), IntegrityError);
    EXPECT_THROW(RawPriceSeries(Region::QLD, t0, {std::nan("")}), IntegrityError);
    RawPriceSeries s(Region::QLD, t0, {-1000.0, 0.0, 17500.0});
    EXPECT_EQ(s.timestamp(2), t0 + minutes{10});
    EXPECT_EQ(s.index_of(t0 + minutes{5}), 1u);
    EXPECT_THROW((void)s.index_of(t0 + minutes{7}), RangeError);
    EXPECT_EQ(s.slice(1, 2).prices()[1], 17500.0);
}

TEST(Synthetic, ConstantWhenAllComponentsOff) {
    SyntheticSpec spec;
    spec.n_days = 7;
    spec.base_level = 100.0;
    spec.daily_amplitude = spec.weekly_amplitude = spec.noise_std = 0.0;
    spec.spike_rate = 0.0;
    const auto s = generate_synthetic(spec, 1);
    ASSERT_EQ(s.size(), 2016u);
    for (double p : s.prices()) ASSERT_EQ(p, 100.0);
}

TEST(Synthetic, DeterministicPerSeed) {
    SyntheticSpec spec;
    spec.n_days = 20;
    spec.spike_rate = 0.01;
    spec.spike_scale = 300.0;
    spec.negative_band = NegativePriceBand{84, 192, 0.3};
    const auto a = generate_synthetic(spec, 42), b = generate_synthetic(spec, 42), c = generate_synthetic(spec, 43);
    EXPECT_TRUE(std::equal(a.prices().begin(), a.prices().end(), b.prices().begin()));
    EXPECT_FALSE(std::equal(a.prices().begin(), a.prices().end(), c.prices().begin()));
}

TEST(Synthetic, LengthFor912Days) {
    SyntheticSpec spec;
    spec.n_days = 912;
    EXPECT_EQ(generate_synthetic(spec, 5).size(), 262656u);
}

TEST(Synthetic, NegativeBandHitRate) {
    SyntheticSpec spec;
    spec.n_days = 120;
    spec.negative_band = NegativePriceBand{84, 192, 0.5};
    const auto s = generate_synthetic(spec, 11);
    std::size_t in = 0, neg = 0, out_neg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const int k = static_cast<int>(i % 288);
        if (k >= 84 && k <= 192) {
            ++in;
            neg += s[i] < 0;
        } else {
            out_neg += s[i] < 0;
        }
    }
    const double pct = 100.0 * static_cast<double>(neg) / static_cast<double>(in);
    EXPECT_NEAR(pct, 50.0, 5.0);
    EXPECT_EQ(out_neg, 0u);
}

TEST(Synthetic, RejectsBadSpec) {
    SyntheticSpec spec;
    spec.n_days = 0;
    EXPECT_THROW((void)generate_synthetic(spec, 1), SpecError);
    spec.n_days = 3;
    spec.noise_std = -1;
    EXPECT_THROW((void)generate_synthetic(spec, 1), SpecError);
    spec.noise_std = 1;
    spec.negative_band = NegativePriceBand{200, 100, 0.5};
    EXPECT_THROW((void)generate_synthetic(spec, 1), SpecError);
    spec.negative_band = NegativePriceBand{10, 20, 1.5};
    EXPECT_THROW((void)generate_synthetic(spec, 1), SpecError);
}

TEST(Summary, MatchesLoopOracle) {
    std::mt19937_64 rng(9);
    std::lognormal_distribution<double> d(4.0, 0.6);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(10);
        for (auto& x : v) x = d(rng);
        const auto s = summarize(v);
        double mean = 0;
        for (double x : v) mean += x;
        mean /= 10;
        double m2 = 0, m3 = 0, m4 = 0;
        for (double x : v) {
            m2 += (x - mean) * (x - mean);
            m3 += std::pow(x - mean, 3);
            m4 += std::pow(x - mean, 4);
        }
        m2 /= 10;
        m3 /= 10;
        m4 /= 10;
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        const double median = (sorted[4] + sorted[5]) / 2;
        auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
        EXPECT_EQ(s.count, 10u);
        EXPECT_LT(rel(s.mean, mean), 1e-9);
        EXPECT_LT(rel(s.std, std::sqrt(m2)), 1e-9);
        EXPECT_LT(rel(s.median, median), 1e-9);
        EXPECT_EQ(s.min, sorted.front());
        EXPECT_EQ(s.max, sorted.back());
        ASSERT_TRUE(s.skewness && s.kurtosis);
        EXPECT_LT(rel(*s.skewness, m3 / std::pow(m2, 1.5)), 1e-9);
        EXPECT_LT(rel(*s.kurtosis, m4 / (m2 * m2)), 1e-9);
    }
}

TEST(Summary, ConstantHasNoShapeMoments) {
    const std::vector<double> v(17, 42.5);
    const auto s = summarize(v);
    EXPECT_EQ(s.mean, 42.5);
    EXPECT_EQ(s.std, 0.0);
    EXPECT_FALSE(s.skewness.has_value());
    EXPECT_FALSE(s.kurtosis.has_value());
    EXPECT_THROW((void)summarize(std::vector<double>{}), EmptySeries);
}

TEST(Aemo, ParsesPriceSectionOnly) {
    const std::string csv =
        "C,header\n"
        "I,DISPATCH,REGIONSUM,4,SETTLEMENTDATE,REGIONID,RRP\n"
        "D,DISPATCH,REGIONSUM,4,\"2023/01/01 00:05:00\",QLD1,555\n"
        "I,DISPATCH,PRICE,5,SETTLEMENTDATE,RUNNO,REGIONID,INTERVENTION,RRP\n"
        "D,DISPATCH,PRICE,5,\"2023/01/01 00:05:00\",1,QLD1,0,81.5\n"
        "D,DISPATCH,PRICE,5,\"2023/01/01 00:05:00\",1,QLD1,1,99.0\n"
        "D,DISPATCH,PRICE,5,\"2023/01/01 00:05:00\",1,NSW1,0,70.0\n"
        "D,DISPATCH,PRICE,5,\"2023/01/01 00:10:00\",1,QLD1,0,-12.25\n";
    const auto rows = parse_dispatch_price_csv(csv, Region::QLD);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].settlement, parse_market_time("2023-01-01 00:05"));
    EXPECT_EQ(rows[0].rrp, 81.5);
    EXPECT_EQ(rows[1].rrp, -12.25);
    EXPECT_THROW((void)parse_dispatch_price_csv("I,DISPATCH,PRICE,5,RUNNO,RRP\n", Region::QLD), FormatError);
}

TEST(Aemo, ZipStoredAndDeflated) {
    const std::string a(5000, 'x'), b = "hello,world\n1,2\n";
    for (int method : {0, 8}) {
        const auto entries = extract_zip(make_zip({{"a.csv", a}, {"b.csv", b}}, method));
        ASSERT_EQ(entries.size(), 2u);
        EXPECT_EQ(entries[0].first, "a.csv");
        EXPECT_EQ(entries[0].second, a);
        EXPECT_EQ(entries[1].second, b);
    }
    EXPECT_THROW((void)extract_zip("not a zip at all, just text padding......"), FormatError);
}

TEST(Aemo, FetchAssemblesAndCaches) {
    const auto cache = scratch_dir("fetch");
    auto archive = std::make_shared<FakeArchive>(true);
    const auto s = fetch_rrp(Region::QLD, parse_date("2023-01-30"), parse_date("2023-02-02"), cache, *archive);
    ASSERT_EQ(s.size(), 4u * 288u);
    EXPECT_EQ(s.start(), parse_market_time("2023-01-30"));
    for (std::size_t i = 0; i < s.size(); i += 37)
        EXPECT_NEAR(s[i], known_price(Region::QLD, s.timestamp(i) + minutes{5}), 1e-9);
    EXPECT_TRUE(std::filesystem::exists(cache_file(cache, Region::QLD, 2023y / January)));
    EXPECT_TRUE(std::filesystem::exists(cache_file(cache, Region::QLD, 2023y / February)));

    // fully cached: never touches the network
    OfflineTransport offline;
    const auto again = fetch_rrp(Region::QLD, parse_date("2023-01-30"), parse_date("2023-02-02"), cache, offline);
    EXPECT_EQ(again, s);
    EXPECT_THROW((void)fetch_rrp(Region::QLD, parse_date("2023-03-01"), parse_date("2023-03-02"), cache, offline),
                 NetworkUnavailable);
    std::filesystem::remove_all(cache);
}

TEST(Aemo, FetchFullPeriodLength) {
    const auto cache = scratch_dir("full");
    FakeArchive archive(false);
    const auto s = fetch_rrp(Region::NSW, parse_date("2023-01-01"), parse_date("2025-06-30"), cache, archive);
    EXPECT_EQ(s.size(), 262656u);
    EXPECT_GE(summarize(s).min, kMarketFloor);
    EXPECT_LE(summarize(s).max, kMarketCap);
    std::filesystem::remove_all(cache);
}

TEST(Aemo, RangeErrors) {
    const auto cache = scratch_dir("range");
    OfflineTransport offline;
    EXPECT_THROW((void)fetch_rrp(Region::QLD, parse_date("2023-02-01"), parse_date("2023-01-01"), cache, offline),
                 RangeError);
    EXPECT_THROW((void)fetch_rrp(Region::QLD, parse_date("2005-01-01"), parse_date("2005-01-02"), cache, offline),
                 RangeError);
    std::filesystem::remove_all(cache);
}
