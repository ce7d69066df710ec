#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "epf/models/config.hpp"
#include "epf/nn/layers.hpp"

namespace epf::models {

// Direct multi-horizon model: [B x L x C] scaled inputs -> [B x H] scaled
// prices in one pass. Channel 0 of the input is always the price.
class Forecaster {
public:
    Forecaster(ModelConfig config, std::uint64_t seed);
    virtual ~Forecaster() = default;
    Forecaster(const Forecaster&) = delete;
    Forecaster& operator=(const Forecaster&) = delete;

    [[nodiscard]] const ModelConfig& config() const { return config_; }
    [[nodiscard]] nn::ParameterStore& parameters() { return params_; }
    [[nodiscard]] const nn::ParameterStore& parameters() const { return params_; }
    [[nodiscard]] std::size_t parameter_count() const { return params_.count(); }

    // Differentiable forward pass; x must be [B x L x C].
    [[nodiscard]] virtual nn::Tensor forward(const nn::Tensor& x) const = 0;

protected:
    [[nodiscard]] nn::Builder builder(const std::string& prefix = "") { return {params_, init_, prefix}; }

    ModelConfig config_;
    nn::ParameterStore params_;
    nn::Initializer init_;
};

// Validates the config and initialises every parameter from `seed`.
[[nodiscard]] std::unique_ptr<Forecaster> build_model(const ModelConfig& config, std::uint64_t seed);

// Inference without graph recording. `batch` holds B x L x C values.
// ShapeError on a size mismatch, NonFiniteOutput if any output is NaN/inf.
[[nodiscard]] std::vector<double> forecast(const Forecaster& model, std::span<const double> batch,
                                           std::size_t batch_size);

// Largest relative difference between analytic MSE gradients and central
// finite differences (step 1e-4) over every parameter. Gradients below 1e-6
// in magnitude are compared on an absolute scale.
[[nodiscard]] double gradient_check(Forecaster& model, std::span<const double> batch,
                                    std::span<const double> targets, std::size_t batch_size);

// Checkpoint: flat parameter vector (columnar file) plus a JSON manifest
// holding the config, version and layout. `path` is the columnar file; the
// manifest sits beside it with a ".json" suffix appended.
void save_checkpoint(const Forecaster& model, const std::filesystem::path& path);
[[nodiscard]] std::unique_ptr<Forecaster> load_checkpoint(const std::filesystem::path& path);

}  // namespace epf::models
