#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "epf/market_data/region.hpp"
#include "epf/market_data/synthetic.hpp"
#include "epf/models/config.hpp"
#include "epf/pipeline/dataset.hpp"
#include "epf/training/grid.hpp"

namespace epf::bench {

// A (lookback, horizon) forecasting setting.
struct Setting {
    std::string name;  // "24H" or "48H"
    std::size_t lookback = 336;
    std::size_t horizon = 48;

    friend bool operator==(const Setting&, const Setting&) = default;
};

// "24H"/"24h" -> (336, 48), "48H"/"48h" -> (672, 96). ConfigError otherwise.
[[nodiscard]] Setting parse_setting(const std::string& name);

enum class DataSourceKind { Aemo, Synthetic };

struct DataSource {
    DataSourceKind kind = DataSourceKind::Synthetic;
    Date start{std::chrono::year{2023}, std::chrono::January, std::chrono::day{1}};
    Date end{std::chrono::year{2023}, std::chrono::January, std::chrono::day{30}};
    SyntheticSpec synthetic;  // n_days, region and start_date are derived
    std::uint64_t seed = 7;   // synthetic; region k uses seed + k
    std::optional<std::filesystem::path> cache_dir;  // aemo; EPF_CACHE_DIR overrides
};

// Model used when the search is disabled.
struct FixedModel {
    double learning_rate = 1e-3;
    std::size_t model_dim = 32;
    std::size_t n_layers = 1;
    std::size_t cnn_filters = 32;
    std::size_t cnn_kernel = 3;
};

enum class TailScope { Region, Global };

struct ExperimentConfig {
    std::vector<Region> regions{Region::QLD};
    std::vector<Setting> settings{Setting{"24H", 336, 48}};
    std::vector<models::ModelFamily> families{models::ModelFamily::DLINEAR};
    DataSource data;
    Date test_start{std::chrono::year{2023}, std::chrono::January, std::chrono::day{22}};
    double train_fraction = 0.7;
    pipeline::ScalerFit scaler_fit = pipeline::ScalerFit::Train;
    training::TrainingConfig training;
    training::GridSpec grid;
    bool search = true;
    std::optional<std::size_t> budget;
    FixedModel fixed;
    double tail_percent = 5.0;
    TailScope tail_scope = TailScope::Region;
    std::size_t seasonal_lag = 336;
    std::filesystem::path output_dir = "epf_out";

    // ConfigError on any inconsistency; run before any stage touches data.
    void validate() const;

    // SHA-256 (hex) of the canonical JSON without output_dir and workers,
    // which cannot change results.
    [[nodiscard]] std::string hash() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Unknown keys, families, regions or settings raise ConfigError.
[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

// EPF_CACHE_DIR, else the configured cache dir, else <output_dir>/cache.
[[nodiscard]] std::filesystem::path resolve_cache_dir(const ExperimentConfig& c);

[[nodiscard]] std::string sha256_hex(std::string_view data);

}  // namespace epf::bench
