#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace epf::models {

enum class ModelFamily { LSTM, CNN_LSTM, TRANSFORMER, DLINEAR, ITRANSFORMER, TIMESNET, MAMBA, TIMEMIXER, TIMEXER };

inline constexpr std::array<ModelFamily, 9> kAllFamilies{
    ModelFamily::LSTM,         ModelFamily::CNN_LSTM, ModelFamily::TRANSFORMER,
    ModelFamily::DLINEAR,      ModelFamily::ITRANSFORMER, ModelFamily::TIMESNET,
    ModelFamily::MAMBA,        ModelFamily::TIMEMIXER, ModelFamily::TIMEXER};

[[nodiscard]] std::string to_string(ModelFamily f);
// Accepts the canonical names case-insensitively, with '-' for '_'.
[[nodiscard]] ModelFamily parse_family(const std::string& name);

// True for the six newer architectures; the three baselines get price only.
[[nodiscard]] constexpr bool uses_time_features(ModelFamily f) {
    return !(f == ModelFamily::LSTM || f == ModelFamily::CNN_LSTM || f == ModelFamily::TRANSFORMER);
}

struct ModelConfig {
    ModelFamily family = ModelFamily::DLINEAR;
    std::size_t model_dim = 32;
    std::size_t n_layers = 1;
    std::optional<std::size_t> cnn_filters;  // CNN_LSTM only
    std::optional<std::size_t> cnn_kernel;   // CNN_LSTM only
    std::size_t lookback = 336;
    std::size_t horizon = 48;
    std::size_t n_features = 1;

    // ConfigError on zero sizes or family/field mismatches.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace epf::models
