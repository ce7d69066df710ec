#include "epf/models/forecaster.hpp"

#include <cmath>

#include "epf/error.hpp"
#include "epf/io/columnar.hpp"
#include "epf/models/families.hpp"

namespace epf::models {

namespace {
constexpr int kCheckpointVersion = 1;
}

Forecaster::Forecaster(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), init_(seed) {
    config_.validate();
}

std::unique_ptr<Forecaster> build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    switch (config.family) {
        case ModelFamily::LSTM: return std::make_unique<LstmModel>(config, seed);
        case ModelFamily::CNN_LSTM: return std::make_unique<CnnLstmModel>(config, seed);
        case ModelFamily::TRANSFORMER: return std::make_unique<TransformerModel>(config, seed);
        case ModelFamily::DLINEAR: return std::make_unique<DLinearModel>(config, seed);
        case ModelFamily::ITRANSFORMER: return std::make_unique<ITransformerModel>(config, seed);
        case ModelFamily::TIMESNET: return std::make_unique<TimesNetModel>(config, seed);
        case ModelFamily::MAMBA: return std::make_unique<MambaModel>(config, seed);
        case ModelFamily::TIMEMIXER: return std::make_unique<TimeMixerModel>(config, seed);
        case ModelFamily::TIMEXER: return std::make_unique<TimeXerModel>(config, seed);
    }
    throw ConfigError("unhandled model family");
}

std::vector<double> forecast(const Forecaster& model, std::span<const double> batch, std::size_t batch_size) {
    const auto& c = model.config();
    if (batch_size == 0 || batch.size() != batch_size * c.lookback * c.n_features) {
        throw ShapeError("forecast: expected " + std::to_string(batch_size) + " x " + std::to_string(c.lookback) +
                         " x " + std::to_string(c.n_features) + " values, got " + std::to_string(batch.size()));
    }
    nn::NoGradGuard no_grad;
    const nn::Tensor x = nn::Tensor::constant({batch_size, c.lookback, c.n_features},
                                              std::vector<double>(batch.begin(), batch.end()));
    const nn::Tensor y = model.forward(x);
    if (y.shape() != nn::Shape{batch_size, c.horizon}) {
        throw ShapeError("forecast: model produced " + nn::shape_string(y.shape()));
    }
    for (double v : y.values()) {
        if (!std::isfinite(v)) throw NonFiniteOutput(to_string(c.family) + " produced a non-finite forecast");
    }
    return y.values();
}

double gradient_check(Forecaster& model, std::span<const double> batch, std::span<const double> targets,
                      std::size_t batch_size) {
    const auto& c = model.config();
    if (targets.size() != batch_size * c.horizon) throw ShapeError("gradient_check: target size");
    const nn::Tensor x = nn::Tensor::constant({batch_size, c.lookback, c.n_features},
                                              std::vector<double>(batch.begin(), batch.end()));
    const nn::Tensor y = nn::Tensor::constant({batch_size, c.horizon}, std::vector<double>(targets.begin(), targets.end()));

    auto& params = model.parameters();
    params.zero_grad();
    nn::backward(nn::mse_loss(model.forward(x), y));
    const std::vector<double> analytic = params.flat_grad();

    auto loss_at = [&](const std::vector<double>& flat) {
        params.assign(flat);
        nn::NoGradGuard no_grad;
        return nn::mse_loss(model.forward(x), y).item();
    };
    const std::vector<double> base = params.flatten();
    std::vector<double> probe = base;
    constexpr double step = 1e-4;
    double worst = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        probe[i] = base[i] + step;
        const double up = loss_at(probe);
        probe[i] = base[i] - step;
        const double down = loss_at(probe);
        probe[i] = base[i];
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    params.assign(base);
    params.zero_grad();
    return worst;
}

void save_checkpoint(const Forecaster& model, const std::filesystem::path& path) {
    io::ColumnarTable table;
    table.add_float64("value", model.parameters().flatten());
    nlohmann::json layout = nlohmann::json::array();
    for (const auto& [name, t] : model.parameters().entries()) layout.push_back({{"name", name}, {"shape", t.shape()}});
    const nlohmann::json manifest{{"version", kCheckpointVersion},
                                  {"config", model.config()},
                                  {"parameter_count", model.parameter_count()},
                                  {"layout", layout}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    io::write_columnar(path, table);
    io::write_text_atomic(path.string() + ".json", manifest.dump(2));
}

std::unique_ptr<Forecaster> load_checkpoint(const std::filesystem::path& path) {
    const auto manifest = nlohmann::json::parse(io::read_text(path.string() + ".json"));
    if (manifest.at("version").get<int>() != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version in " + path.string());
    }
    auto model = build_model(manifest.at("config").get<ModelConfig>(), 0);
    const auto table = io::read_columnar(path);
    model->parameters().assign(table.float64("value"));
    return model;
}

}  // namespace epf::models
