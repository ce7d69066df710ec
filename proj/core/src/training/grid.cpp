#include "epf/training/grid.hpp"

#include <cmath>
#include <limits>
#include <tuple>

#include <nlohmann/json.hpp>

#include "epf/error.hpp"
#include "epf/training/parallel.hpp"

namespace epf::training {

using models::ModelConfig;
using models::ModelFamily;

void to_json(nlohmann::json& j, const GridSpec& g) {
    j = {{"learning_rates", g.learning_rates},
         {"dims", g.dims},
         {"layers", g.layers},
         {"cnn_kernels", g.cnn_kernels},
         {"cnn_filters", g.cnn_filters}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
    g.learning_rates = j.value("learning_rates", g.learning_rates);
    g.dims = j.value("dims", g.dims);
    g.layers = j.value("layers", g.layers);
    g.cnn_kernels = j.value("cnn_kernels", g.cnn_kernels);
    g.cnn_filters = j.value("cnn_filters", g.cnn_filters);
}

std::vector<GridPoint> enumerate_grid(ModelFamily family, const GridSpec& grid, const ModelConfig& base) {
    std::vector<GridPoint> out;
    ModelConfig c;
    c.family = family;
    c.lookback = base.lookback;
    c.horizon = base.horizon;
    c.n_features = base.n_features;
    for (double lr : grid.learning_rates) {
        if (family == ModelFamily::DLINEAR) {
            out.push_back({lr, c});
            continue;
        }
        for (std::size_t dim : grid.dims) {
            c.model_dim = dim;
            if (family == ModelFamily::CNN_LSTM) {
                c.n_layers = 1;
                for (std::size_t k : grid.cnn_kernels) {
                    for (std::size_t f : grid.cnn_filters) {
                        c.cnn_kernel = k;
                        c.cnn_filters = f;
                        out.push_back({lr, c});
                    }
                }
                continue;
            }
            for (std::size_t layers : grid.layers) {
                c.n_layers = layers;
                out.push_back({lr, c});
            }
        }
    }
    for (const auto& p : out) p.config.validate();
    return out;
}

bool ranks_before(const LeaderboardEntry& a, const LeaderboardEntry& b) {
    auto key = [](const LeaderboardEntry& e) {
        const double loss = std::isnan(e.val_loss) ? std::numeric_limits<double>::infinity() : e.val_loss;
        const auto& c = e.point.config;
        return std::make_tuple(loss, e.point.learning_rate, c.model_dim, c.n_layers, c.cnn_kernel.value_or(0),
                               c.cnn_filters.value_or(0));
    };
    return key(a) < key(b);
}

void to_json(nlohmann::json& j, const LeaderboardEntry& e) {
    j = {{"learning_rate", e.point.learning_rate},
         {"config", e.point.config},
         {"val_loss", std::isfinite(e.val_loss) ? nlohmann::json(e.val_loss) : nlohmann::json(nullptr)},
         {"diverged", e.diverged}};
    if (!e.error.empty()) j["error"] = e.error;
}

void to_json(nlohmann::json& j, const GridResult& r) {
    j = {{"best", r.best}, {"grid_size", r.grid_size}, {"evaluated", r.leaderboard.size()},
         {"leaderboard", r.leaderboard}};
}

GridResult grid_search(ModelFamily family, const GridSpec& grid, const ModelConfig& base,
                       std::optional<std::size_t> budget, const GridEvaluator& evaluate, std::size_t workers) {
    if (budget && *budget == 0) throw BudgetZero("search budget must allow at least one combination");
    auto points = enumerate_grid(family, grid, base);
    if (points.empty()) throw ConfigError("grid has no combinations for " + models::to_string(family));
    GridResult result;
    result.grid_size = points.size();
    if (budget && *budget < points.size()) points.resize(*budget);

    result.leaderboard.resize(points.size());
    parallel_for(points.size(), workers, [&](std::size_t i) {
        auto& e = result.leaderboard[i];
        e.point = points[i];
        try {
            e.val_loss = evaluate(points[i]);
        } catch (const DivergenceError& err) {
            e.val_loss = std::numeric_limits<double>::infinity();
            e.error = err.what();
        }
        if (!std::isfinite(e.val_loss)) {
            e.val_loss = std::numeric_limits<double>::infinity();
            e.diverged = true;
        }
    });
    result.best = *std::min_element(result.leaderboard.begin(), result.leaderboard.end(), ranks_before);
    return result;
}

GridResult grid_search(ModelFamily family, const GridSpec& grid, const pipeline::WindowSet& train_windows,
                       const pipeline::WindowSet& val_windows, const TrainingConfig& cfg,
                       std::optional<std::size_t> budget) {
    cfg.validate();
    ModelConfig base;
    base.lookback = train_windows.lookback();
    base.horizon = train_windows.horizon();
    base.n_features = train_windows.n_features();
    auto evaluate = [&](const GridPoint& p) {
        auto model = models::build_model(p.config, cfg.search_seed);
        TrainingConfig point_cfg = cfg;
        point_cfg.learning_rate = p.learning_rate;
        return train(*model, train_windows, val_windows, point_cfg, cfg.search_seed).best_val_loss;
    };
    return grid_search(family, grid, base, budget, evaluate, cfg.workers);
}

}  // namespace epf::training
