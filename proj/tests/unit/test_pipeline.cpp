#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "epf/error.hpp"
#include "epf/market_data/synthetic.hpp"
#include "epf/pipeline/dataset.hpp"
#include "epf/pipeline/features.hpp"
#include "epf/pipeline/prepared.hpp"

using namespace epf;
using namespace epf::pipeline;

namespace {

HalfHourlySeries ramp_series(std::size_t n, MarketTime start = parse_market_time("2023-01-01")) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 50.0 + 30.0 * std::sin(static_cast<double>(i) * 0.13) + (i % 7);
    return HalfHourlySeries(Region::QLD, start, std::move(v));
}

std::shared_ptr<const FeatureMatrix> price_matrix(std::size_t n) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 0.0);
    return std::make_shared<const FeatureMatrix>(parse_market_time("2023-01-01"), std::vector<std::string>{"price"}, n,
                                                 std::move(v));
}

}  // namespace

TEST(Downsample, BlockMean) {
    RawPriceSeries raw(Region::QLD, parse_market_time("2023-01-01"), {1, 2, 3, 4, 5, 6, 10, 10, 10, 10, 10, 16});
    const auto hh = downsample_to_30min(raw);
    ASSERT_EQ(hh.size(), 2u);
    EXPECT_DOUBLE_EQ(hh[0], 3.5);
    EXPECT_DOUBLE_EQ(hh[1], 11.0);
    EXPECT_EQ(hh.start(), raw.start());
}

TEST(Downsample, FullPeriodCountAndMean) {
    SyntheticSpec spec;
    spec.n_days = 912;
    spec.spike_rate = 0.002;
    spec.spike_scale = 2000.0;
    spec.negative_band = NegativePriceBand{84, 192, 0.2};
    const auto raw = generate_synthetic(spec, 17);
    const auto hh = downsample_to_30min(raw);
    ASSERT_EQ(raw.size(), 262656u);
    ASSERT_EQ(hh.size(), 43776u);
    long double a = 0, b = 0;
    for (double p : raw.prices()) a += p;
    for (double p : hh.prices()) b += p;
    const double ma = static_cast<double>(a / raw.size()), mb = static_cast<double>(b / hh.size());
    EXPECT_LT(std::abs(ma - mb) / std::abs(ma), 1e-9);
    EXPECT_LE(*std::max_element(hh.prices().begin(), hh.prices().end()),
              *std::max_element(raw.prices().begin(), raw.prices().end()));
}

TEST(Downsample, RejectsMisalignedInput) {
    RawPriceSeries partial(Region::QLD, parse_market_time("2023-01-01"), std::vector<double>(7, 1.0));
    EXPECT_THROW((void)downsample_to_30min(partial), AlignmentError);
    RawPriceSeries offset(Region::QLD, parse_market_time("2023-01-01 00:05"), std::vector<double>(6, 1.0));
    EXPECT_THROW((void)downsample_to_30min(offset), AlignmentError);
}

TEST(Split, FullPeriodExample) {
    const auto s = ramp_series(43776);
    const auto split = chronological_split(s, parse_market_time("2025-01-01"), 0.70);
    EXPECT_EQ(split.train.size(), 24561u);
    EXPECT_EQ(split.val.size(), 10527u);
    EXPECT_EQ(split.test.size(), 8688u);
    EXPECT_EQ(split.train.begin, 0u);
    EXPECT_EQ(split.train.end, split.val.begin);
    EXPECT_EQ(split.val.end, split.test.begin);
    EXPECT_EQ(split.test.end, s.size());
}

TEST(Split, OrderingPropertyAndRejections) {
    std::mt19937_64 rng(5);
    const auto s = ramp_series(48 * 60);
    std::uniform_int_distribution<int> day(2, 58);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    for (int i = 0; i < 200; ++i) {
        const auto t = s.start() + std::chrono::hours{24} * day(rng);
        DatasetSplit sp;
        try {
            sp = chronological_split(s, t, frac(rng));
        } catch (const RangeError&) {
            continue;
        }
        ASSERT_GT(sp.train.size(), 0u);
        ASSERT_GT(sp.val.size(), 0u);
        EXPECT_LT(s.timestamp(sp.train.end - 1), s.timestamp(sp.val.begin));
        EXPECT_LT(s.timestamp(sp.val.end - 1), s.timestamp(sp.test.begin));
        EXPECT_EQ(s.timestamp(sp.test.begin), t);
        EXPECT_EQ(sp.train.size() + sp.val.size() + sp.test.size(), s.size());
    }
    EXPECT_THROW((void)chronological_split(s, s.start() + std::chrono::hours{240}, 1.0), ConfigError);
    EXPECT_THROW((void)chronological_split(s, s.start() + std::chrono::hours{240}, 0.0), ConfigError);
    EXPECT_THROW((void)chronological_split(s, s.start() + std::chrono::minutes{7}, 0.5), RangeError);
}

TEST(Features, CalendarColumns) {
    const auto s = ramp_series(96, parse_market_time("2024-12-31"));
    const auto m = add_time_features(s);
    ASSERT_EQ(m.cols(), 5u);
    EXPECT_EQ(m.columns(), kFeatureColumns);
    // 2025-01-01 00:00 is row 48
    EXPECT_EQ(m.at(48, 1), 0.0);
    EXPECT_EQ(m.at(48, 2), 2.0);
    EXPECT_EQ(m.at(48, 3), 1.0);
    EXPECT_EQ(m.at(48, 4), 1.0);
    EXPECT_EQ(m.at(47, 1), 23.0);
    EXPECT_EQ(m.at(47, 3), 31.0);
    EXPECT_EQ(m.at(47, 4), 12.0);
    EXPECT_EQ(m.at(20, 1), m.at(21, 1));
    EXPECT_EQ(m.at(5, 0), s[5]);
    const auto p = m.select(false);
    EXPECT_EQ(p.cols(), 1u);
    EXPECT_EQ(p.column(0), m.column(0));
}

TEST(Scaler, EndpointsOutOfRangeAndRoundTrip) {
    const auto t0 = parse_market_time("2023-01-01");
    FeatureMatrix m(t0, {"price"}, 4, {-100, 0, 300, 400});
    DatasetSplit sp{{0, 3}, {3, 3}, {3, 4}};
    const auto params = fit_scaler(m, sp);
    const auto scaled = apply_scaler(m, params);
    EXPECT_DOUBLE_EQ(scaled.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(scaled.at(1, 0), 0.25);
    EXPECT_DOUBLE_EQ(scaled.at(2, 0), 1.0);
    EXPECT_DOUBLE_EQ(scaled.at(3, 0), 1.25);
    EXPECT_EQ(params.fitted_on, "train");

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1000, 17500);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        EXPECT_NEAR(params.invert(0, params.scale(0, x)), x, 1e-9);
    }
    const std::vector<double> s{0.0, 0.5, 1.25};
    const auto back = invert_prices(s, params);
    EXPECT_NEAR(back[1], 100.0, 1e-12);
    EXPECT_NEAR(back[2], 400.0, 1e-12);
}

TEST(Scaler, DegenerateAndTrainValFit) {
    const auto t0 = parse_market_time("2023-01-01");
    FeatureMatrix m(t0, {"price"}, 4, {5, 5, 9, 1});
    const auto p = fit_scaler(m, DatasetSplit{{0, 2}, {2, 3}, {3, 4}});
    EXPECT_TRUE(p.degenerate[0]);
    EXPECT_EQ(apply_scaler(m, p).at(3, 0), 0.0);
    const auto q = fit_scaler(m, DatasetSplit{{0, 2}, {2, 3}, {3, 4}}, ScalerFit::TrainVal);
    EXPECT_FALSE(q.degenerate[0]);
    EXPECT_EQ(q.max[0], 9.0);
    EXPECT_EQ(q.fitted_on, "train+val");
}

TEST(Windows, CountAndAlignment) {
    const auto m = price_matrix(1200);
    const auto w = build_windows(m, {100, 1100}, 336, 48);
    EXPECT_EQ(w.size(), 617u);
    EXPECT_EQ(build_windows(m, {0, 384}, 336, 48).size(), 1u);
    EXPECT_THROW((void)build_windows(m, {0, 383}, 336, 48), SegmentTooShort);
    EXPECT_EQ(w.target_timestamp(0, 0), m->timestamp(100 + 336));
    std::vector<double> x(336), y(48);
    const std::size_t idx[] = {0};
    w.gather_inputs(idx, x);
    w.gather_targets(idx, y);
    EXPECT_EQ(x.front(), 100.0);
    EXPECT_EQ(x.back(), 435.0);
    EXPECT_EQ(y.front(), 436.0);
    EXPECT_EQ(y.back(), 483.0);
}

TEST(Windows, BruteForceEnumeration) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> len(2, 400), lh(1, 120);
    const auto m = price_matrix(400);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = len(rng), L = lh(rng), H = lh(rng);
        // brute force: every start whose input and target fit inside [0, n)
        std::vector<std::pair<std::size_t, std::size_t>> expected;
        for (std::size_t s = 0; s + L + H <= n; ++s) expected.emplace_back(s, s + L);
        if (expected.empty()) {
            EXPECT_THROW((void)build_windows(m, {0, n}, L, H), SegmentTooShort);
            continue;
        }
        const auto w = build_windows(m, {0, n}, L, H);
        ASSERT_EQ(w.size(), n - L - H + 1);
        ASSERT_EQ(w.size(), expected.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            EXPECT_EQ(w.input_row(i), expected[i].first);
            EXPECT_EQ(w.target_row(i, 0), expected[i].second);
        }
    }
}

TEST(Prepared, SmokeSplitAndRoundTrip) {
    SyntheticSpec spec;
    spec.n_days = 30;
    const auto hh = downsample_to_30min(generate_synthetic(spec, 3));
    PrepareOptions o;
    o.test_start = parse_market_time("2023-01-22");
    o.train_fraction = 0.6;
    const auto d = prepare_dataset(hh, o);
    EXPECT_EQ(d.split().train.size(), 604u);
    EXPECT_EQ(d.split().val.size(), 404u);
    EXPECT_EQ(d.split().test.size(), 432u);
    EXPECT_EQ(d.train_windows(true).size(), 604u - 384u + 1u);
    EXPECT_EQ(d.train_windows(true).n_features(), 5u);
    EXPECT_EQ(d.train_windows(false).n_features(), 1u);
    EXPECT_EQ(d.test_series().size(), 432u);
    EXPECT_EQ(d.test_series().start(), o.test_start);

    // train rows scale into [0, 1]
    const auto& sc = d.scaled(true);
    for (std::size_t r = d.split().train.begin; r < d.split().train.end; ++r)
        for (std::size_t c = 0; c < sc.cols(); ++c) {
            ASSERT_GE(sc.at(r, c), 0.0);
            ASSERT_LE(sc.at(r, c), 1.0);
        }

    const auto path = std::filesystem::temp_directory_path() / ("epf_prep_" + std::to_string(::getpid()) + ".epfc");
    save_prepared(path, d);
    const auto back = load_prepared(path);
    EXPECT_EQ(back.split(), d.split());
    EXPECT_EQ(back.scaler(), d.scaler());
    EXPECT_EQ(back.scaled(true), d.scaled(true));
    EXPECT_EQ(back.series(), d.series());
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");

    o.train_fraction = 0.7;
    o.test_start = parse_market_time("2023-01-25");
    o.lookback = 672;
    o.horizon = 96;
    EXPECT_THROW((void)prepare_dataset(hh, o), SegmentTooShort);
}
