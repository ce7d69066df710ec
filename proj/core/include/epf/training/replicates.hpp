#pragma once

#include <vector>

#include "epf/evaluation/dump.hpp"
#include "epf/pipeline/prepared.hpp"
#include "epf/training/trainer.hpp"

namespace epf::training {

struct SeedRun {
    TrainedRun run;
    evaluation::ForecastDump dump;  // test-set forecasts of the restored model
};

// One training run per seed in cfg.seeds, each from a fresh initialisation
// with that seed, followed by a test-set forecast dump in A$/MWh.
// `learning_rate` overrides cfg.learning_rate (normally the tuned value).
[[nodiscard]] std::vector<SeedRun> run_seeds(const models::ModelConfig& config, double learning_rate,
                                             const pipeline::PreparedDataset& data, const TrainingConfig& cfg,
                                             const evaluation::DumpMeta& meta);

}  // namespace epf::training
