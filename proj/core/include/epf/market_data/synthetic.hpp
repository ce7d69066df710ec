#pragma once

#include <cstdint>
#include <optional>

#include "epf/market_data/series.hpp"

namespace epf {

// Band of five-minute intervals of the day, inclusive on both ends (0..287).
struct NegativePriceBand {
    int start_interval = 0;
    int end_interval = 0;
    double probability = 0.0;  // chance an in-band interval clears below zero
};

struct VolatilityBand {
    int start_interval = 0;
    int end_interval = 0;
    double extra_std = 0.0;  // additional Gaussian noise inside the band, A$/MWh
};

// Parameters of the desk-scale price generator. It reproduces the stylised
// intraday facts of NEM prices (daily and weekly cycles, rare spikes, a midday
// negative-price regime, an evening volatility window) without network access.
struct SyntheticSpec {
    int n_days = 30;
    double base_level = 100.0;
    double daily_amplitude = 40.0;
    double weekly_amplitude = 10.0;
    double noise_std = 10.0;
    double spike_rate = 0.0;
    double spike_scale = 0.0;
    std::optional<NegativePriceBand> negative_band;
    std::optional<VolatilityBand> volatility_band;
    Region region = Region::QLD;
    Date start_date{std::chrono::year{2023}, std::chrono::January, std::chrono::day{1}};

    // Throws SpecError when a field is out of range or a band is inconsistent.
    void validate() const;
};

// Deterministic for a fixed (spec, seed) on a given platform.
[[nodiscard]] RawPriceSeries generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace epf
