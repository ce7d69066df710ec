#include "epf/market_data/synthetic.hpp"

#include <algorithm>
#include <numbers>
#include <random>

namespace epf {

namespace {

void check_band(int start, int end, const char* what) {
    if (start < 0 || end > kIntervalsPerDay5 - 1 || start > end) {
        throw SpecError(std::string(what) + " must satisfy 0 <= start <= end <= 287");
    }
}

bool in_band(int k, int start, int end) { return k >= start && k <= end; }

}  // namespace

void SyntheticSpec::validate() const {
    if (n_days < 1) throw SpecError("n_days must be positive");
    if (!start_date.ok()) throw SpecError("invalid start date");
    if (daily_amplitude < 0 || weekly_amplitude < 0 || noise_std < 0 || spike_scale < 0) {
        throw SpecError("amplitudes and standard deviations must be non-negative");
    }
    if (spike_rate < 0 || spike_rate > 1) throw SpecError("spike_rate must lie in [0, 1]");
    if (negative_band) {
        check_band(negative_band->start_interval, negative_band->end_interval, "negative_band");
        if (negative_band->probability < 0 || negative_band->probability > 1) {
            throw SpecError("negative_band probability must lie in [0, 1]");
        }
    }
    if (volatility_band) {
        check_band(volatility_band->start_interval, volatility_band->end_interval,
                   "volatility_band");
        if (volatility_band->extra_std < 0) throw SpecError("volatility_band extra_std must be >= 0");
    }
}

RawPriceSeries generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    constexpr double two_pi = 2.0 * std::numbers::pi;
    const auto n = static_cast<std::size_t>(spec.n_days) * kIntervalsPerDay5;
    std::vector<double> prices(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int day = static_cast<int>(i / kIntervalsPerDay5);
        const int k = static_cast<int>(i % kIntervalsPerDay5);
        const double day_phase = static_cast<double>(k) / kIntervalsPerDay5;

        // Every interval consumes the same five variates so the stream stays
        // aligned no matter which features are switched on.
        const double z_noise = gauss(rng);
        const double z_vol = gauss(rng);
        const double u_spike = unit(rng);
        const double spike_size = expo(rng);
        const double u_negative = unit(rng);

        // Evening peak around 18:00, weekday/weekend swing over the week.
        double price = spec.base_level +
                       spec.daily_amplitude * std::cos(two_pi * (day_phase - 0.75)) +
                       spec.weekly_amplitude * std::cos(two_pi * ((day % 7) + day_phase) / 7.0) +
                       spec.noise_std * z_noise;
        if (spec.volatility_band &&
            in_band(k, spec.volatility_band->start_interval, spec.volatility_band->end_interval)) {
            price += spec.volatility_band->extra_std * z_vol;
        }
        if (u_spike < spec.spike_rate) price += spec.spike_scale * spike_size;
        if (spec.negative_band &&
            in_band(k, spec.negative_band->start_interval, spec.negative_band->end_interval) &&
            u_negative < spec.negative_band->probability) {
            // Map the (already consumed) uniform onto a depth in [-50, -5).
            const double depth = u_negative / spec.negative_band->probability;
            price = -5.0 - 45.0 * depth;
        }
        prices[i] = std::clamp(price, kMarketFloor, kMarketCap);
    }
    return RawPriceSeries(spec.region, start_of(spec.start_date), std::move(prices));
}

}  // namespace epf
