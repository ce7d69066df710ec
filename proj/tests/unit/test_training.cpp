#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "epf/error.hpp"
#include "epf/market_data/synthetic.hpp"
#include "epf/nn/adam.hpp"
#include "epf/pipeline/prepared.hpp"
#include "epf/training/grid.hpp"
#include "epf/training/parallel.hpp"
#include "epf/training/replicates.hpp"
#include "epf/training/trainer.hpp"

using namespace epf;
using namespace epf::training;
using models::ModelConfig;
using models::ModelFamily;

namespace {

pipeline::PreparedDataset seasonal_data(int n_days, const char* test_start, double noise, std::size_t L = 336,
                                        std::size_t H = 48, double fraction = 0.7) {
    SyntheticSpec spec;
    spec.n_days = n_days;
    spec.noise_std = noise;
    const auto hh = pipeline::downsample_to_30min(generate_synthetic(spec, 19));
    pipeline::PrepareOptions o;
    o.lookback = L;
    o.horizon = H;
    o.test_start = parse_market_time(test_start);
    o.train_fraction = fraction;
    return pipeline::prepare_dataset(hh, o);
}

ModelConfig dlinear(std::size_t L = 336, std::size_t H = 48) {
    ModelConfig c;
    c.lookback = L;
    c.horizon = H;
    return c;
}

TrainingConfig quick(int epochs, double lr = 1e-3) {
    TrainingConfig t;
    t.max_epochs = epochs;
    t.learning_rate = lr;
    t.batch_size = 32;
    return t;
}

}  // namespace

TEST(Plateau, CutsAfterPatienceAndFloors) {
    PlateauScheduler s({0.5, 3, 0.1}, 1.0);
    EXPECT_EQ(s.step(1.0), 1.0);
    EXPECT_EQ(s.step(1.0), 1.0);  // equal is not an improvement
    EXPECT_EQ(s.step(2.0), 1.0);
    EXPECT_EQ(s.step(1.5), 1.0);  // three bad epochs tolerated
    EXPECT_EQ(s.step(1.5), 0.5);  // fourth cuts and resets
    EXPECT_EQ(s.reductions(), 1);
    EXPECT_EQ(s.step(0.9), 0.5);
    for (int i = 0; i < 4; ++i) (void)s.step(5.0);
    EXPECT_EQ(s.learning_rate(), 0.25);
    for (int i = 0; i < 12; ++i) (void)s.step(5.0);
    EXPECT_EQ(s.learning_rate(), 0.1);
}

TEST(Plateau, NeverCutsWhileImproving) {
    PlateauScheduler s({}, 1e-3);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(s.step(100.0 - i), 1e-3);
    EXPECT_EQ(s.reductions(), 0);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
    nn::ParameterStore store;
    auto p = store.add("p", {3}, {1.0, -2.0, 0.5});
    nn::Adam adam(store, 0.1);
    const auto w = nn::Tensor::constant({3}, {3.0, -0.5, 1e-3});
    nn::backward(nn::sum_all(nn::mul(p, w)));
    adam.step();
    EXPECT_NEAR(p.values()[0], 0.9, 1e-6);
    EXPECT_NEAR(p.values()[1], -1.9, 1e-6);
    EXPECT_NEAR(p.values()[2], 0.4, 1e-4);
    EXPECT_EQ(adam.steps(), 1);
}

TEST(TrainingConfigTest, ValidateAndJson) {
    TrainingConfig c;
    c.validate();
    nlohmann::json j = c;
    EXPECT_EQ(j.at("max_epochs"), 30);
    EXPECT_EQ(j.at("early_stop_patience"), 10);
    auto back = nlohmann::json{{"max_epochs", 4}}.get<TrainingConfig>();
    EXPECT_EQ(back.max_epochs, 4);
    EXPECT_EQ(back.batch_size, c.batch_size);
    for (auto mutate : std::vector<std::function<void(TrainingConfig&)>>{
             [](auto& t) { t.learning_rate = 0; }, [](auto& t) { t.batch_size = 0; },
             [](auto& t) { t.max_epochs = 0; }, [](auto& t) { t.seeds.clear(); },
             [](auto& t) { t.plateau.factor = 1.0; }, [](auto& t) { t.workers = 0; }}) {
        TrainingConfig bad;
        mutate(bad);
        EXPECT_THROW(bad.validate(), ConfigError);
    }
}

TEST(Train, DLinearFitsNoiselessSeasonality) {
    const auto d = seasonal_data(70, "2023-02-26", 0.0);
    auto model = models::build_model(dlinear(), 1);
    const auto val = d.val_windows(false);
    const auto run = train(*model, d.train_windows(false), val, quick(30, 1e-3), 1);

    std::vector<double> targets(val.size() * 48);
    std::vector<std::size_t> all(val.size());
    std::iota(all.begin(), all.end(), 0);
    val.gather_targets(all, targets);
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
    double var = 0;
    for (double t : targets) var += (t - mean) * (t - mean);
    var /= static_cast<double>(targets.size());
    EXPECT_LT(run.best_val_loss, 0.01 * var);
}

TEST(Train, DeterministicAndRestoresBest) {
    const auto d = seasonal_data(45, "2023-02-06", 6.0);
    const auto tw = d.train_windows(false), vw = d.val_windows(false);
    auto a = models::build_model(dlinear(), 3), b = models::build_model(dlinear(), 3);
    const auto cfg = quick(6, 5e-3);
    const auto ra = train(*a, tw, vw, cfg, 9), rb = train(*b, tw, vw, cfg, 9);
    EXPECT_EQ(ra.history, rb.history);
    EXPECT_EQ(ra.best_parameters, rb.best_parameters);
    EXPECT_EQ(a->parameters().flatten(), ra.best_parameters);
    const double again = evaluate_loss(*a, vw);
    EXPECT_NEAR(again, ra.best_val_loss, 1e-7 * ra.best_val_loss);
    const auto best = std::min_element(ra.history.begin(), ra.history.end(),
                                       [](const auto& x, const auto& y) { return x.val_loss < y.val_loss; });
    EXPECT_EQ(best->epoch, ra.best_epoch);

    // a different shuffle seed changes the trajectory
    auto c = models::build_model(dlinear(), 3);
    EXPECT_NE(train(*c, tw, vw, cfg, 10).history, ra.history);
}

TEST(Train, StrictlyImprovingRunUsesEveryEpoch) {
    const auto d = seasonal_data(45, "2023-02-06", 2.0);
    auto m = models::build_model(dlinear(), 1);
    const auto run = train(*m, d.train_windows(false), d.val_windows(false), quick(8, 2e-4), 1);
    for (std::size_t i = 1; i < run.history.size(); ++i)
        ASSERT_LT(run.history[i].val_loss, run.history[i - 1].val_loss) << "precondition: monotone validation loss";
    EXPECT_EQ(run.stopped_epoch, 8);
    EXPECT_EQ(run.best_epoch, 8);
    for (const auto& e : run.history) EXPECT_EQ(e.learning_rate, 2e-4);
}

TEST(Train, EarlyStoppingBound) {
    const auto d = seasonal_data(45, "2023-02-06", 25.0);
    const auto tw = d.train_windows(false), vw = d.val_windows(false);
    bool stopped_early = false;
    for (int patience : {1, 2, 3}) {
        for (double lr : {0.05, 0.2}) {
            auto m = models::build_model(dlinear(), 2);
            auto cfg = quick(40, lr);
            cfg.early_stop_patience = patience;
            const auto run = train(*m, tw, vw, cfg, 4);
            EXPECT_LE(run.stopped_epoch - run.best_epoch, patience);
            if (run.stopped_epoch < cfg.max_epochs) {
                stopped_early = true;
                EXPECT_EQ(run.stopped_epoch - run.best_epoch, patience);
            }
            EXPECT_EQ(static_cast<int>(run.history.size()), run.stopped_epoch);
        }
    }
    EXPECT_TRUE(stopped_early);
}

TEST(Train, NonFiniteLossDiverges) {
    const auto d = seasonal_data(45, "2023-02-06", 2.0);
    const auto& clean = d.scaled(false);
    std::vector<double> v(clean.values().begin(), clean.values().end());
    v[10] = std::numeric_limits<double>::quiet_NaN();
    const auto poisoned =
        std::make_shared<const pipeline::FeatureMatrix>(clean.start(), clean.columns(), clean.rows(), v);
    const auto tw = pipeline::build_windows(poisoned, d.split().train, 336, 48);
    auto m = models::build_model(dlinear(), 1);
    EXPECT_THROW((void)train(*m, tw, d.val_windows(false), quick(2), 1), DivergenceError);
    auto mismatched = models::build_model(dlinear(672, 96), 1);
    EXPECT_THROW((void)train(*mismatched, d.train_windows(false), d.val_windows(false), quick(1), 1), ShapeError);
}

TEST(Parallel, RunsAllAndRethrowsLowestIndex) {
    std::vector<int> hit(50, 0);
    parallel_for(50, 4, [&](std::size_t i) { hit[i] += 1; });
    EXPECT_TRUE(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
    try {
        parallel_for(20, 3, [](std::size_t i) {
            if (i == 7 || i == 13) throw RangeError(std::to_string(i));
        });
        FAIL() << "expected an exception";
    } catch (const RangeError& e) {
        EXPECT_STREQ(e.what(), "7");
    }
}

TEST(Grid, EnumerationCounts) {
    const GridSpec g;
    EXPECT_EQ(enumerate_grid(ModelFamily::DLINEAR, g, dlinear()).size(), 5u);
    EXPECT_EQ(enumerate_grid(ModelFamily::CNN_LSTM, g, dlinear()).size(), 375u);
    for (auto f : {ModelFamily::LSTM, ModelFamily::TRANSFORMER, ModelFamily::ITRANSFORMER, ModelFamily::TIMESNET,
                   ModelFamily::MAMBA, ModelFamily::TIMEMIXER, ModelFamily::TIMEXER})
        EXPECT_EQ(enumerate_grid(f, g, dlinear()).size(), 50u) << models::to_string(f);

    const auto cnn = enumerate_grid(ModelFamily::CNN_LSTM, g, dlinear());
    std::set<std::tuple<double, std::size_t, std::size_t, std::size_t>> unique;
    for (const auto& p : cnn) {
        EXPECT_EQ(p.config.n_layers, 1u);
        unique.emplace(p.learning_rate, p.config.model_dim, *p.config.cnn_kernel, *p.config.cnn_filters);
    }
    EXPECT_EQ(unique.size(), 375u);
}

TEST(Grid, LearningRateOutermost) {
    const auto pts = enumerate_grid(ModelFamily::LSTM, GridSpec{}, dlinear());
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(pts[i].learning_rate, 0.001);
    EXPECT_EQ(pts[0].config.model_dim, 32u);
    EXPECT_EQ(pts[0].config.n_layers, 1u);
    EXPECT_EQ(pts[1].config.n_layers, 2u);
    EXPECT_EQ(pts[2].config.model_dim, 64u);
    EXPECT_EQ(pts[10].learning_rate, 0.005);
    EXPECT_TRUE(std::all_of(pts.begin(), pts.end(), [](const auto& p) { return p.config.family == ModelFamily::LSTM; }));
}

TEST(Grid, TieBreakBudgetAndDivergence) {
    GridSpec g;
    g.dims = {32, 64};
    g.layers = {1, 2};
    // every point ties except the diverging ones
    auto flat = [](const GridPoint& p) {
        if (p.config.model_dim == 64 && p.config.n_layers == 1) throw DivergenceError("boom");
        if (p.learning_rate == 0.1) return std::numeric_limits<double>::quiet_NaN();
        return 0.25;
    };
    const auto r = grid_search(ModelFamily::MAMBA, g, dlinear(), std::nullopt, flat);
    EXPECT_EQ(r.grid_size, 20u);
    EXPECT_EQ(r.leaderboard.size(), 20u);
    EXPECT_EQ(r.best.point.learning_rate, 0.001);
    EXPECT_EQ(r.best.point.config.model_dim, 32u);
    EXPECT_EQ(r.best.point.config.n_layers, 1u);
    std::size_t diverged = 0;
    for (const auto& e : r.leaderboard) {
        if (e.diverged) {
            ++diverged;
            EXPECT_TRUE(std::isinf(e.val_loss));
        }
    }
    EXPECT_EQ(diverged, 5u + 4u - 1u);  // dim 64 x 1 layer at every rate, plus the rest of lr 0.1

    const auto truncated = grid_search(ModelFamily::MAMBA, g, dlinear(), 3, flat);
    EXPECT_EQ(truncated.leaderboard.size(), 3u);
    EXPECT_EQ(truncated.grid_size, 20u);
    EXPECT_THROW((void)grid_search(ModelFamily::MAMBA, g, dlinear(), 0, flat), BudgetZero);

    // lower loss beats lower learning rate
    auto prefer_last = [](const GridPoint& p) { return p.learning_rate == 0.1 && p.config.model_dim == 64 ? 0.1 : 0.2; };
    const auto best = grid_search(ModelFamily::MAMBA, g, dlinear(), std::nullopt, prefer_last).best;
    EXPECT_EQ(best.point.learning_rate, 0.1);
    EXPECT_EQ(best.point.config.model_dim, 64u);
}

TEST(Grid, WinnerIndependentOfOrderAndWorkers) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> coarse(0, 4);
    std::map<std::pair<double, std::size_t>, double> loss;
    const auto pts = enumerate_grid(ModelFamily::TIMEXER, GridSpec{}, dlinear());
    for (const auto& p : pts) loss[{p.learning_rate, p.config.model_dim * 10 + p.config.n_layers}] = coarse(rng) * 0.5;
    auto eval = [&](const GridPoint& p) { return loss.at({p.learning_rate, p.config.model_dim * 10 + p.config.n_layers}); };
    const auto serial = grid_search(ModelFamily::TIMEXER, GridSpec{}, dlinear(), std::nullopt, eval, 1);
    const auto threaded = grid_search(ModelFamily::TIMEXER, GridSpec{}, dlinear(), std::nullopt, eval, 4);
    EXPECT_EQ(serial.best.point, threaded.best.point);
    for (int rep = 0; rep < 20; ++rep) {
        auto board = serial.leaderboard;
        std::shuffle(board.begin(), board.end(), rng);
        const auto winner = *std::min_element(board.begin(), board.end(), ranks_before);
        EXPECT_EQ(winner.point, serial.best.point);
    }
}

TEST(Grid, TrainsRealPoints) {
    const auto d = seasonal_data(45, "2023-02-06", 4.0);
    GridSpec g;
    g.learning_rates = {1e-3, 1e-2};
    auto cfg = quick(2);
    const auto r = grid_search(ModelFamily::DLINEAR, g, d.train_windows(false), d.val_windows(false), cfg, std::nullopt);
    ASSERT_EQ(r.leaderboard.size(), 2u);
    for (const auto& e : r.leaderboard) {
        EXPECT_FALSE(e.diverged);
        EXPECT_GT(e.val_loss, 0.0);
    }
    const nlohmann::json j = r;
    EXPECT_EQ(j.at("leaderboard").size(), 2u);
    EXPECT_EQ(j.at("grid_size"), 2);
}

TEST(Replicates, SeedsGiveDistinctRunsAndRepeatExactly) {
    const auto d = seasonal_data(40, "2023-02-01", 5.0, 96, 24);
    auto cfg = quick(2);
    cfg.seeds = {1, 2, 3};
    ModelConfig mc;
    mc.family = ModelFamily::LSTM;
    mc.model_dim = 4;
    mc.lookback = 96;
    mc.horizon = 24;
    const evaluation::DumpMeta meta{"QLD", "24H", "LSTM", 0, 24};
    const auto a = run_seeds(mc, 5e-3, d, cfg, meta);
    ASSERT_EQ(a.size(), 3u);
    std::set<std::vector<double>> params;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].run.seed, cfg.seeds[i]);
        EXPECT_EQ(a[i].dump.meta.seed, cfg.seeds[i]);
        EXPECT_EQ(a[i].dump.size(), d.test_windows(false).size() * 24);
        params.insert(a[i].run.best_parameters);
    }
    EXPECT_EQ(params.size(), 3u);

    cfg.workers = 3;
    const auto b = run_seeds(mc, 5e-3, d, cfg, meta);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].dump, b[i].dump);
        EXPECT_EQ(a[i].run.history, b[i].run.history);
    }

    mc.lookback = 336;
    EXPECT_THROW((void)run_seeds(mc, 5e-3, d, cfg, meta), ConfigError);
}
