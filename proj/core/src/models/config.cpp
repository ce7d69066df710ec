#include "epf/models/config.hpp"

#include <algorithm>
#include <cctype>

#include "epf/error.hpp"

namespace epf::models {

std::string to_string(ModelFamily f) {
    switch (f) {
        case ModelFamily::LSTM: return "LSTM";
        case ModelFamily::CNN_LSTM: return "CNN_LSTM";
        case ModelFamily::TRANSFORMER: return "TRANSFORMER";
        case ModelFamily::DLINEAR: return "DLINEAR";
        case ModelFamily::ITRANSFORMER: return "ITRANSFORMER";
        case ModelFamily::TIMESNET: return "TIMESNET";
        case ModelFamily::MAMBA: return "MAMBA";
        case ModelFamily::TIMEMIXER: return "TIMEMIXER";
        case ModelFamily::TIMEXER: return "TIMEXER";
    }
    return "?";
}

ModelFamily parse_family(const std::string& name) {
    std::string key = name;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
        return c == '-' ? '_' : static_cast<char>(std::toupper(c));
    });
    for (auto f : kAllFamilies)
        if (to_string(f) == key) return f;
    throw ConfigError("unknown model family '" + name + "'");
}

void ModelConfig::validate() const {
    const std::string who = to_string(family);
    if (lookback == 0 || horizon == 0 || n_features == 0) {
        throw ConfigError(who + ": lookback, horizon and n_features must be positive");
    }
    if (model_dim == 0 || n_layers == 0) throw ConfigError(who + ": model_dim and n_layers must be positive");
    const bool has_cnn = cnn_filters.has_value() || cnn_kernel.has_value();
    if (family == ModelFamily::CNN_LSTM) {
        if (!cnn_filters || !cnn_kernel) throw ConfigError("CNN_LSTM needs cnn_filters and cnn_kernel");
        if (*cnn_filters == 0 || *cnn_kernel == 0) throw ConfigError("CNN_LSTM: cnn sizes must be positive");
        if (*cnn_kernel % 2 == 0) throw ConfigError("CNN_LSTM: cnn_kernel must be odd");
    } else if (has_cnn) {
        throw ConfigError(who + " does not take cnn_filters/cnn_kernel");
    }
    if (family == ModelFamily::DLINEAR && (model_dim != 32 || n_layers != 1)) {
        // DLinear has no width or depth; anything but the defaults is a mistake.
        throw ConfigError("DLINEAR does not take model_dim/n_layers");
    }
    if (family == ModelFamily::TIMEXER && lookback < 16) throw ConfigError("TIMEXER needs lookback >= 16");
    if (family == ModelFamily::TIMEMIXER && lookback < 8) throw ConfigError("TIMEMIXER needs lookback >= 8");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"family", to_string(c.family)}, {"model_dim", c.model_dim}, {"n_layers", c.n_layers},
                       {"lookback", c.lookback},        {"horizon", c.horizon},     {"n_features", c.n_features}};
    if (c.cnn_filters) j["cnn_filters"] = *c.cnn_filters;
    if (c.cnn_kernel) j["cnn_kernel"] = *c.cnn_kernel;
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    c = ModelConfig{};
    c.family = parse_family(j.at("family").get<std::string>());
    c.model_dim = j.value("model_dim", c.model_dim);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.lookback = j.value("lookback", c.lookback);
    c.horizon = j.value("horizon", c.horizon);
    c.n_features = j.value("n_features", c.n_features);
    if (j.contains("cnn_filters")) c.cnn_filters = j.at("cnn_filters").get<std::size_t>();
    if (j.contains("cnn_kernel")) c.cnn_kernel = j.at("cnn_kernel").get<std::size_t>();
}

}  // namespace epf::models
