#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "epf/models/forecaster.hpp"
#include "epf/pipeline/dataset.hpp"

namespace epf::training {

struct PlateauSchedule {
    double factor = 0.5;
    int patience = 3;  // epochs without improvement tolerated before a cut
    double min_lr = 1e-6;
};

struct TrainingConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    int max_epochs = 30;
    int early_stop_patience = 10;
    PlateauSchedule plateau;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::uint64_t search_seed = 1;  // every grid point trains with this seed
    std::size_t workers = 1;        // parallel grid points / seed replicates

    // ConfigError on a non-positive field or an empty seed list.
    void validate() const;
};

void to_json(nlohmann::json& j, const PlateauSchedule& s);
void from_json(const nlohmann::json& j, PlateauSchedule& s);
// Missing keys keep their defaults.
void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);

// Reduce-on-plateau: improvement means strictly below the best loss so far;
// after more than `patience` consecutive non-improving epochs the rate is
// multiplied by `factor` (floored at min_lr) and the counter resets.
class PlateauScheduler {
public:
    PlateauScheduler(PlateauSchedule schedule, double lr);

    // Feeds one epoch's validation loss, returns the rate for the next epoch.
    double step(double val_loss);
    [[nodiscard]] double learning_rate() const { return lr_; }
    [[nodiscard]] int reductions() const { return reductions_; }

private:
    PlateauSchedule schedule_;
    double lr_;
    double best_;
    int bad_epochs_ = 0;
    int reductions_ = 0;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;  // rate used during the epoch

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainedRun {
    models::ModelConfig config;
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> best_parameters;
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    int stopped_epoch = 0;
    double best_val_loss = 0.0;
    double wall_time_s = 0.0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
// Manifest view of a run; parameters are left out.
void to_json(nlohmann::json& j, const TrainedRun& r);

// Mean squared error over every target of every window, no graph recording.
[[nodiscard]] double evaluate_loss(const models::Forecaster& model, const pipeline::WindowSet& windows,
                                   std::size_t batch_size = 256);

// Adam on MSE of scaled prices. Training windows are reshuffled each epoch
// from `seed`; validation order is fixed. Stops after max_epochs or once
// early_stop_patience epochs pass without a new best validation loss, then
// loads the best parameters back into `model`. DivergenceError when a loss
// turns non-finite, EmptyDataset when either set has no windows.
[[nodiscard]] TrainedRun train(models::Forecaster& model, const pipeline::WindowSet& train_windows,
                               const pipeline::WindowSet& val_windows, const TrainingConfig& cfg,
                               std::uint64_t seed);

}  // namespace epf::training
