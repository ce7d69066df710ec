#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "epf/training/trainer.hpp"

namespace epf::training {

struct GridSpec {
    std::vector<double> learning_rates{0.001, 0.005, 0.01, 0.05, 0.1};
    std::vector<std::size_t> dims{32, 64, 128, 256, 512};
    std::vector<std::size_t> layers{1, 2};
    std::vector<std::size_t> cnn_kernels{3, 5, 7};
    std::vector<std::size_t> cnn_filters{32, 64, 128, 256, 512};
};

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

struct GridPoint {
    double learning_rate = 0.0;
    models::ModelConfig config;

    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

// Combinations for one family, in the order a budget truncates them:
// learning rate ascending outermost, then dim, layers, kernel, filters, each
// in grid order. DLinear varies only the learning rate; CNN-LSTM keeps one
// LSTM layer and varies dim, kernel and filters; every other family varies
// dim and layers. `base` supplies lookback, horizon and n_features.
[[nodiscard]] std::vector<GridPoint> enumerate_grid(models::ModelFamily family, const GridSpec& grid,
                                                    const models::ModelConfig& base);

struct LeaderboardEntry {
    GridPoint point;
    double val_loss = 0.0;  // +inf when the run diverged
    bool diverged = false;
    std::string error;
};

// Strict ordering used to pick the winner: lower validation loss, then lower
// learning rate, smaller dim, fewer layers, smaller kernel, fewer filters.
// NaN losses rank as +inf.
[[nodiscard]] bool ranks_before(const LeaderboardEntry& a, const LeaderboardEntry& b);

struct GridResult {
    LeaderboardEntry best;
    std::vector<LeaderboardEntry> leaderboard;  // enumeration order
    std::size_t grid_size = 0;                  // before truncation
};

void to_json(nlohmann::json& j, const LeaderboardEntry& e);
void to_json(nlohmann::json& j, const GridResult& r);

// Returns the point's best validation loss. DivergenceError (or a
// non-finite return) marks the point diverged instead of failing the search.
using GridEvaluator = std::function<double(const GridPoint&)>;

// BudgetZero if budget == 0. A budget keeps the first `budget` points of the
// enumeration.
[[nodiscard]] GridResult grid_search(models::ModelFamily family, const GridSpec& grid,
                                     const models::ModelConfig& base, std::optional<std::size_t> budget,
                                     const GridEvaluator& evaluate, std::size_t workers = 1);

// Trains every point once with cfg.search_seed at the point's learning rate.
[[nodiscard]] GridResult grid_search(models::ModelFamily family, const GridSpec& grid,
                                     const pipeline::WindowSet& train_windows,
                                     const pipeline::WindowSet& val_windows, const TrainingConfig& cfg,
                                     std::optional<std::size_t> budget);

}  // namespace epf::training
