#include "epf/training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "epf/error.hpp"
#include "epf/nn/adam.hpp"
#include "epf/nn/ops.hpp"

namespace epf::training {

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
    if (early_stop_patience <= 0) throw ConfigError("early_stop_patience must be positive");
    if (!(plateau.factor > 0.0 && plateau.factor < 1.0)) throw ConfigError("plateau factor must lie in (0, 1)");
    if (plateau.patience < 0) throw ConfigError("plateau patience must be non-negative");
    if (plateau.min_lr < 0.0) throw ConfigError("plateau min_lr must be non-negative");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (workers == 0) throw ConfigError("workers must be positive");
}

void to_json(nlohmann::json& j, const PlateauSchedule& s) {
    j = {{"factor", s.factor}, {"patience", s.patience}, {"min_lr", s.min_lr}};
}

void from_json(const nlohmann::json& j, PlateauSchedule& s) {
    s.factor = j.value("factor", s.factor);
    s.patience = j.value("patience", s.patience);
    s.min_lr = j.value("min_lr", s.min_lr);
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
    j = {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
         {"max_epochs", c.max_epochs},       {"early_stop_patience", c.early_stop_patience},
         {"plateau", c.plateau},             {"seeds", c.seeds},
         {"search_seed", c.search_seed},     {"workers", c.workers}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    if (j.contains("plateau")) j.at("plateau").get_to(c.plateau);
    c.seeds = j.value("seeds", c.seeds);
    c.search_seed = j.value("search_seed", c.search_seed);
    c.workers = j.value("workers", c.workers);
}

PlateauScheduler::PlateauScheduler(PlateauSchedule schedule, double lr)
    : schedule_(schedule), lr_(lr), best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double val_loss) {
    if (val_loss < best_) {
        best_ = val_loss;
        bad_epochs_ = 0;
    } else if (++bad_epochs_ > schedule_.patience) {
        const double next = std::max(lr_ * schedule_.factor, schedule_.min_lr);
        if (next < lr_) ++reductions_;
        lr_ = next;
        bad_epochs_ = 0;
    }
    return lr_;
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
    j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"lr", r.learning_rate}};
}

void to_json(nlohmann::json& j, const TrainedRun& r) {
    j = {{"config", r.config},
         {"learning_rate", r.learning_rate},
         {"seed", r.seed},
         {"parameter_count", r.best_parameters.size()},
         {"history", r.history},
         {"best_epoch", r.best_epoch},
         {"stopped_epoch", r.stopped_epoch},
         {"best_val_loss", r.best_val_loss},
         {"wall_time_s", r.wall_time_s}};
}

namespace {

struct Batch {
    nn::Tensor x, y;
};

Batch gather(const pipeline::WindowSet& w, std::span<const std::size_t> ids, std::vector<double>& xin,
             std::vector<double>& yin) {
    const std::size_t n = ids.size();
    xin.resize(n * w.lookback() * w.n_features());
    yin.resize(n * w.horizon());
    w.gather_inputs(ids, xin);
    w.gather_targets(ids, yin);
    return {nn::Tensor::constant({n, w.lookback(), w.n_features()}, xin),
            nn::Tensor::constant({n, w.horizon()}, yin)};
}

}  // namespace

double evaluate_loss(const models::Forecaster& model, const pipeline::WindowSet& windows, std::size_t batch_size) {
    if (windows.empty()) throw EmptyDataset("no windows to evaluate");
    nn::NoGradGuard no_grad;
    std::vector<std::size_t> ids;
    std::vector<double> xin, yin;
    double sum = 0.0;
    for (std::size_t first = 0; first < windows.size(); first += batch_size) {
        const std::size_t n = std::min(batch_size, windows.size() - first);
        ids.resize(n);
        std::iota(ids.begin(), ids.end(), first);
        const auto b = gather(windows, ids, xin, yin);
        sum += nn::mse_loss(model.forward(b.x), b.y).item() * static_cast<double>(n);
    }
    return sum / static_cast<double>(windows.size());
}

TrainedRun train(models::Forecaster& model, const pipeline::WindowSet& train_windows,
                 const pipeline::WindowSet& val_windows, const TrainingConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (train_windows.empty()) throw EmptyDataset("training set has no windows");
    if (val_windows.empty()) throw EmptyDataset("validation set has no windows");
    const auto& mc = model.config();
    if (train_windows.lookback() != mc.lookback || train_windows.horizon() != mc.horizon ||
        train_windows.n_features() != mc.n_features || val_windows.n_features() != mc.n_features) {
        throw ShapeError("window sets do not match the model configuration");
    }

    const auto t0 = std::chrono::steady_clock::now();
    TrainedRun run;
    run.config = mc;
    run.learning_rate = cfg.learning_rate;
    run.seed = seed;
    run.best_val_loss = std::numeric_limits<double>::infinity();

    nn::Adam adam(model.parameters(), cfg.learning_rate);
    PlateauScheduler scheduler(cfg.plateau, cfg.learning_rate);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> xin, yin;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - first);
            const auto b = gather(train_windows, std::span(order).subspan(first, n), xin, yin);
            adam.zero_grad();
            const auto loss = nn::mse_loss(model.forward(b.x), b.y);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw DivergenceError("training loss became non-finite in epoch " + std::to_string(epoch));
            }
            nn::backward(loss);
            adam.step();
            sum += value * static_cast<double>(n);
        }
        const double train_loss = sum / static_cast<double>(order.size());
        double val_loss = 0.0;
        try {
            val_loss = evaluate_loss(model, val_windows);
        } catch (const NonFiniteOutput&) {
            val_loss = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(val_loss)) {
            throw DivergenceError("validation loss became non-finite in epoch " + std::to_string(epoch));
        }
        run.history.push_back({epoch, train_loss, val_loss, adam.learning_rate()});
        run.stopped_epoch = epoch;
        if (val_loss < run.best_val_loss) {
            run.best_val_loss = val_loss;
            run.best_epoch = epoch;
            run.best_parameters = model.parameters().flatten();
        }
        if (epoch - run.best_epoch >= cfg.early_stop_patience) break;
        adam.set_learning_rate(scheduler.step(val_loss));
    }

    model.parameters().assign(run.best_parameters);
    model.parameters().zero_grad();
    run.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

}  // namespace epf::training
