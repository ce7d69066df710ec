#include "epf/training/replicates.hpp"

#include <string>

#include "epf/error.hpp"
#include "epf/training/parallel.hpp"

namespace epf::training {

std::vector<SeedRun> run_seeds(const models::ModelConfig& config, double learning_rate,
                               const pipeline::PreparedDataset& data, const TrainingConfig& cfg,
                               const evaluation::DumpMeta& meta) {
    cfg.validate();
    const bool time = models::uses_time_features(config.family);
    const auto train_w = data.train_windows(time);
    const auto val_w = data.val_windows(time);
    const auto test_w = data.test_windows(time);
    if (config.n_features != train_w.n_features() || config.lookback != data.lookback() ||
        config.horizon != data.horizon()) {
        throw ConfigError("model config (L=" + std::to_string(config.lookback) + ", H=" + std::to_string(config.horizon) +
                          ", C=" + std::to_string(config.n_features) + ") does not match the prepared dataset (L=" +
                          std::to_string(data.lookback()) + ", H=" + std::to_string(data.horizon()) +
                          ", C=" + std::to_string(train_w.n_features()) + ")");
    }
    const auto prices = data.series().prices();

    TrainingConfig run_cfg = cfg;
    run_cfg.learning_rate = learning_rate;
    std::vector<SeedRun> out(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t i) {
        const auto seed = cfg.seeds[i];
        auto model = models::build_model(config, seed);
        out[i].run = train(*model, train_w, val_w, run_cfg, seed);
        auto m = meta;
        m.seed = seed;
        out[i].dump = evaluation::make_forecast_dump(*model, test_w, data.scaler(), prices, m);
    });
    return out;
}

}  // namespace epf::training
