#include <random>

#include <benchmark/benchmark.h>

#include "epf/evaluation/metrics.hpp"
#include "epf/models/forecaster.hpp"
#include "epf/nn/ops.hpp"

namespace {

using namespace epf;

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

void BM_Matmul(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    auto a = nn::Tensor::constant({n, n}, noise(n * n, 1));
    auto b = nn::Tensor::constant({n, n}, noise(n * n, 2));
    for (auto _ : st) benchmark::DoNotOptimize(nn::matmul(a, b).data().data());
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_AttentionForwardBackward(benchmark::State& st) {
    const std::size_t B = 8, T = static_cast<std::size_t>(st.range(0)), d = 16;
    for (auto _ : st) {
        auto q = nn::Tensor::parameter({B, T, d}, noise(B * T * d, 3));
        auto k = nn::Tensor::parameter({B, T, d}, noise(B * T * d, 4));
        auto v = nn::Tensor::parameter({B, T, d}, noise(B * T * d, 5));
        nn::backward(nn::sum_all(nn::attention(q, k, v, 4)));
        benchmark::DoNotOptimize(q.grad().data());
    }
}
BENCHMARK(BM_AttentionForwardBackward)->Arg(96)->Arg(336);

void BM_Forecast(benchmark::State& st, models::ModelFamily family) {
    models::ModelConfig c;
    c.family = family;
    if (family != models::ModelFamily::DLINEAR) c.model_dim = 16;
    c.n_features = models::uses_time_features(family) ? 5 : 1;
    auto model = models::build_model(c, 1);
    const std::size_t B = 16;
    const auto x = noise(B * c.lookback * c.n_features, 6);
    for (auto _ : st) benchmark::DoNotOptimize(models::forecast(*model, x, B).data());
}
BENCHMARK_CAPTURE(BM_Forecast, dlinear, models::ModelFamily::DLINEAR);
BENCHMARK_CAPTURE(BM_Forecast, lstm, models::ModelFamily::LSTM);
BENCHMARK_CAPTURE(BM_Forecast, timexer, models::ModelFamily::TIMEXER);

void BM_Metrics(benchmark::State& st) {
    const std::size_t windows = static_cast<std::size_t>(st.range(0)), H = 48;
    evaluation::ForecastDump dump;
    dump.meta.horizon = H;
    const auto t = noise(windows * H, 7), p = noise(windows * H, 8);
    for (std::size_t w = 0; w < windows; ++w)
        for (std::size_t h = 0; h < H; ++h)
            dump.push(static_cast<std::int64_t>(w), static_cast<std::int64_t>(h + 1),
                      MarketTime{std::chrono::seconds{static_cast<std::int64_t>((w + h) * 1800)}}, t[w * H + h],
                      p[w * H + h]);
    const evaluation::NaiveBenchmark bench{336, windows * H, 1.0};
    for (auto _ : st) benchmark::DoNotOptimize(evaluation::evaluate(dump, bench));
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(dump.size()));
}
BENCHMARK(BM_Metrics)->Arg(100)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
