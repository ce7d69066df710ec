#include "epf/bench/experiment.hpp"

#include <chrono>
#include <map>

#include <nlohmann/json.hpp>

#include "epf/bench/report.hpp"
#include "epf/error.hpp"
#include "epf/evaluation/report.hpp"
#include "epf/io/columnar.hpp"
#include "epf/market_data/summary.hpp"
#include "epf/market_data/synthetic.hpp"
#include "epf/pipeline/features.hpp"
#include "epf/pipeline/prepared.hpp"
#include "epf/training/grid.hpp"
#include "epf/training/replicates.hpp"

namespace epf::bench {

using nlohmann::json;
using models::ModelFamily;

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Fetch: return "fetch";
        case Stage::Prepare: return "prepare";
        case Stage::Tune: return "tune";
        case Stage::Train: return "train";
        case Stage::Evaluate: return "evaluate";
        case Stage::Report: return "report";
    }
    return "?";
}

Stage parse_stage(const std::string& name) {
    for (Stage s : kAllStages)
        if (to_string(s) == name) return s;
    throw ConfigError("unknown stage '" + name + "'");
}

std::string platform_string() {
    std::string s;
#if defined(__clang__)
    s = "clang " __clang_version__;
#elif defined(__GNUC__)
    s = "gcc " __VERSION__;
#else
    s = "unknown compiler";
#endif
#if defined(__x86_64__)
    s += " x86_64";
#elif defined(__aarch64__)
    s += " aarch64";
#endif
#if defined(__linux__)
    s += " linux";
#elif defined(__APPLE__)
    s += " darwin";
#endif
    return s;
}

namespace paths {
namespace {
std::string tag(Region r, const std::string& s) { return std::string(to_string(r)) + "_" + s; }
std::string tag(Region r, const std::string& s, ModelFamily f) { return tag(r, s) + "_" + models::to_string(f); }
}  // namespace

std::string series(Region r) { return "data/" + std::string(to_string(r)) + ".epfc"; }
std::string prepared(Region r, const std::string& s) { return "prepared/" + tag(r, s) + ".epfc"; }
std::string tuned(Region r, const std::string& s, ModelFamily f) { return "tune/" + tag(r, s, f) + ".json"; }
std::string run_dir(Region r, const std::string& s, ModelFamily f) { return "runs/" + tag(r, s, f); }
std::string dump(Region r, const std::string& s, ModelFamily f, std::uint64_t seed) {
    return run_dir(r, s, f) + "/dump_seed" + std::to_string(seed) + ".epfc";
}
std::string checkpoint(Region r, const std::string& s, ModelFamily f, std::uint64_t seed) {
    return run_dir(r, s, f) + "/model_seed" + std::to_string(seed) + ".ckpt";
}
std::string run_manifest(Region r, const std::string& s, ModelFamily f, std::uint64_t seed) {
    return run_dir(r, s, f) + "/run_seed" + std::to_string(seed) + ".json";
}
std::string evaluation(Region r, const std::string& s, ModelFamily f) { return "eval/" + tag(r, s, f) + ".json"; }
std::string diagnostics(Region r, const std::string& s) { return "eval/" + tag(r, s) + "_diagnostics.json"; }
}  // namespace paths

namespace {

json summary_json(const SeriesSummary& s) {
    return {{"count", s.count},
            {"mean", s.mean},
            {"std", s.std},
            {"min", s.min},
            {"median", s.median},
            {"max", s.max},
            {"skewness", s.skewness ? json(*s.skewness) : json(nullptr)},
            {"kurtosis", s.kurtosis ? json(*s.kurtosis) : json(nullptr)}};
}

void save_series(const std::filesystem::path& path, const HalfHourlySeries& s, const json& extra) {
    io::ColumnarTable t;
    const auto p = s.prices();
    t.add_float64("price", std::vector<double>(p.begin(), p.end()));
    std::filesystem::create_directories(path.parent_path());
    io::write_columnar(path, t);
    json meta = extra;
    meta["region"] = std::string(to_string(s.region()));
    meta["start"] = format_market_time(s.start());
    meta["start_epoch"] = epoch_seconds(s.start());
    meta["rows"] = s.size();
    io::write_text_atomic(path.string() + ".json", meta.dump(2) + "\n");
}

HalfHourlySeries load_series(const std::filesystem::path& path) {
    const auto meta = json::parse(io::read_text(path.string() + ".json"));
    const auto t = io::read_columnar(path);
    return HalfHourlySeries(parse_region(meta.at("region").get<std::string>()),
                            from_epoch_seconds(meta.at("start_epoch").get<std::int64_t>()), t.float64("price"));
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::filesystem::create_directories(path.parent_path());
    io::write_text_atomic(path, j.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) { return json::parse(io::read_text(path)); }

std::string cell_name(Region r) { return std::string(to_string(r)); }
std::string cell_name(Region r, const std::string& s) { return cell_name(r) + "/" + s; }
std::string cell_name(Region r, const std::string& s, ModelFamily f) {
    return cell_name(r, s) + "/" + models::to_string(f);
}

std::size_t region_index(Region r) {
    for (std::size_t i = 0; i < kAllRegions.size(); ++i)
        if (kAllRegions[i] == r) return i;
    return 0;
}

std::vector<double> test_prices(const pipeline::PreparedDataset& d) {
    const auto s = d.test_series();
    return {s.prices().begin(), s.prices().end()};
}

}  // namespace

Experiment::Experiment(ExperimentConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      hash_((config_.validate(), config_.hash())),
      ledger_(config_.output_dir / "ledger.jsonl"),
      transport_(std::move(transport)) {
    json j = config_;
    j["config_hash"] = hash_;
    write_json(config_.output_dir / "config.json", j);
}

void Experiment::cell(StageSummary& summary, Stage stage, const std::string& cell_name,
                      std::vector<std::string> inputs, const std::function<std::vector<std::string>()>& body) {
    const std::string st = to_string(stage);
    LedgerRecord rec;
    rec.config_hash = hash_;
    rec.stage = st;
    rec.cell = cell_name;
    rec.inputs = inputs;

    if (auto done = ledger_.completed(hash_, st, cell_name, root()); done && done->inputs == inputs) {
        rec.outputs = done->outputs;
        rec.status = StageStatus::Skipped;
        ledger_.append(rec);
        ++summary.skipped;
        if (log_) log_(st + " " + cell_name + " up to date");
        return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
        for (const auto& in : inputs)
            if (!std::filesystem::exists(root() / in)) throw Error("missing input " + in + " (upstream stage failed or not run)");
        rec.outputs = body();
        rec.status = StageStatus::Ok;
        ++summary.ok;
    } catch (const std::exception& e) {
        rec.status = StageStatus::Failed;
        rec.error = e.what();
        ++summary.failed;
    }
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ledger_.append(rec);
    if (log_) log_(st + " " + cell_name + " " + to_string(rec.status) + (rec.error.empty() ? "" : ": " + rec.error));
}

StageSummary Experiment::run(Stage stage) {
    switch (stage) {
        case Stage::Fetch: return fetch();
        case Stage::Prepare: return prepare();
        case Stage::Tune: return tune();
        case Stage::Train: return train();
        case Stage::Evaluate: return evaluate();
        case Stage::Report: return report();
    }
    return {};
}

StageSummary Experiment::run_all() {
    StageSummary total;
    for (Stage s : kAllStages) total += run(s);
    return total;
}

StageSummary Experiment::fetch() {
    StageSummary sum;
    const auto& d = config_.data;
    for (Region r : config_.regions) {
        cell(sum, Stage::Fetch, cell_name(r), {}, [&] {
            RawPriceSeries raw = [&] {
                if (d.kind == DataSourceKind::Synthetic) {
                    SyntheticSpec spec = d.synthetic;
                    spec.n_days = static_cast<int>(days_inclusive(d.start, d.end));
                    spec.start_date = d.start;
                    spec.region = r;
                    return generate_synthetic(spec, d.seed + region_index(r));
                }
                const auto cache = resolve_cache_dir(config_);
                if (!transport_) transport_ = std::make_shared<CurlTransport>();
                return fetch_rrp(r, d.start, d.end, cache, *transport_);
            }();
            const auto hh = pipeline::downsample_to_30min(raw);
            const json extra{{"source", d.kind == DataSourceKind::Aemo ? "aemo" : "synthetic"},
                             {"summary_5min", summary_json(summarize(raw))},
                             {"summary_30min", summary_json(summarize(hh))},
                             {"rows_5min", raw.size()},
                             {"config_hash", hash_}};
            save_series(root() / paths::series(r), hh, extra);
            return std::vector<std::string>{paths::series(r), paths::series(r) + ".json"};
        });
    }
    return sum;
}

StageSummary Experiment::prepare() {
    StageSummary sum;
    for (Region r : config_.regions) {
        for (const auto& s : config_.settings) {
            cell(sum, Stage::Prepare, cell_name(r, s.name), {paths::series(r)}, [&] {
                const auto series = load_series(root() / paths::series(r));
                pipeline::PrepareOptions o;
                o.lookback = s.lookback;
                o.horizon = s.horizon;
                o.test_start = start_of(config_.test_start);
                o.train_fraction = config_.train_fraction;
                o.scaler_fit = config_.scaler_fit;
                const auto data = pipeline::prepare_dataset(series, o);
                const auto out = paths::prepared(r, s.name);
                pipeline::save_prepared(root() / out, data);
                return std::vector<std::string>{out, out + ".json"};
            });
        }
    }
    return sum;
}

StageSummary Experiment::tune() {
    StageSummary sum;
    for (Region r : config_.regions) {
        for (const auto& s : config_.settings) {
            for (ModelFamily f : config_.families) {
                cell(sum, Stage::Tune, cell_name(r, s.name, f), {paths::prepared(r, s.name)}, [&] {
                    const auto data = pipeline::load_prepared(root() / paths::prepared(r, s.name));
                    const bool time = models::uses_time_features(f);
                    json out{{"config_hash", hash_}, {"family", models::to_string(f)}};
                    models::ModelConfig mc;
                    double lr = 0.0;
                    if (config_.search) {
                        const auto result = training::grid_search(f, config_.grid, data.train_windows(time),
                                                                  data.val_windows(time), config_.training,
                                                                  config_.budget);
                        if (result.best.diverged) throw DivergenceError("every evaluated grid point diverged");
                        mc = result.best.point.config;
                        lr = result.best.point.learning_rate;
                        out["search"] = result;
                    } else {
                        const auto& fx = config_.fixed;
                        mc.family = f;
                        mc.lookback = s.lookback;
                        mc.horizon = s.horizon;
                        mc.n_features = time ? pipeline::kFeatureColumns.size() : 1;
                        if (f != ModelFamily::DLINEAR) {
                            mc.model_dim = fx.model_dim;
                            mc.n_layers = f == ModelFamily::CNN_LSTM ? 1 : fx.n_layers;
                        }
                        if (f == ModelFamily::CNN_LSTM) {
                            mc.cnn_filters = fx.cnn_filters;
                            mc.cnn_kernel = fx.cnn_kernel;
                        }
                        mc.validate();
                        lr = fx.learning_rate;
                        out["search"] = nullptr;
                    }
                    out["selected"] = {{"learning_rate", lr}, {"config", mc}};
                    const auto path = paths::tuned(r, s.name, f);
                    write_json(root() / path, out);
                    return std::vector<std::string>{path};
                });
            }
        }
    }
    return sum;
}

StageSummary Experiment::train() {
    StageSummary sum;
    for (Region r : config_.regions) {
        for (const auto& s : config_.settings) {
            for (ModelFamily f : config_.families) {
                cell(sum, Stage::Train, cell_name(r, s.name, f), {paths::prepared(r, s.name), paths::tuned(r, s.name, f)},
                     [&] {
                         const auto data = pipeline::load_prepared(root() / paths::prepared(r, s.name));
                         const auto sel = read_json(root() / paths::tuned(r, s.name, f)).at("selected");
                         const auto mc = sel.at("config").get<models::ModelConfig>();
                         const double lr = sel.at("learning_rate").get<double>();
                         const evaluation::DumpMeta meta{std::string(to_string(r)), s.name, models::to_string(f), 0,
                                                         s.horizon};
                         const auto runs = training::run_seeds(mc, lr, data, config_.training, meta);
                         std::vector<std::string> outputs;
                         for (const auto& sr : runs) {
                             const auto seed = sr.run.seed;
                             const auto dump = paths::dump(r, s.name, f, seed);
                             evaluation::write_dump(root() / dump, sr.dump);
                             auto model = models::build_model(mc, seed);
                             model->parameters().assign(sr.run.best_parameters);
                             const auto ckpt = paths::checkpoint(r, s.name, f, seed);
                             models::save_checkpoint(*model, root() / ckpt);
                             json manifest = sr.run;
                             manifest["config_hash"] = hash_;
                             manifest["platform"] = platform_string();
                             manifest["training"] = config_.training;
                             manifest["checkpoint"] = ckpt;
                             manifest["dump"] = dump;
                             const auto man = paths::run_manifest(r, s.name, f, seed);
                             write_json(root() / man, manifest);
                             for (const auto& p : {dump, dump + ".json", ckpt, ckpt + ".json", man}) outputs.push_back(p);
                         }
                         return outputs;
                     });
            }
        }
    }
    return sum;
}

StageSummary Experiment::evaluate() {
    StageSummary sum;
    for (const auto& s : config_.settings) {
        std::vector<std::string> all_prepared;
        for (Region r : config_.regions) all_prepared.push_back(paths::prepared(r, s.name));

        // pooled thresholds need every region's test prices
        auto thresholds_source = [&](Region r) {
            std::vector<double> prices;
            for (Region q : config_.regions) {
                if (config_.tail_scope == TailScope::Region && q != r) continue;
                const auto tp = test_prices(pipeline::load_prepared(root() / paths::prepared(q, s.name)));
                prices.insert(prices.end(), tp.begin(), tp.end());
            }
            return prices;
        };

        for (Region r : config_.regions) {
            cell(sum, Stage::Evaluate, cell_name(r, s.name) + "/diagnostics", {paths::prepared(r, s.name)}, [&] {
                const auto data = pipeline::load_prepared(root() / paths::prepared(r, s.name));
                const auto test = data.test_series();
                json out{{"config_hash", hash_},
                         {"region", std::string(to_string(r))},
                         {"setting", s.name},
                         {"seasonal_naive", evaluation::seasonal_naive(test.prices(), config_.seasonal_lag)},
                         {"diurnal", evaluation::diurnal_diagnostics(test)}};
                const auto path = paths::diagnostics(r, s.name);
                write_json(root() / path, out);
                return std::vector<std::string>{path};
            });

            for (ModelFamily f : config_.families) {
                std::vector<std::string> inputs =
                    config_.tail_scope == TailScope::Global ? all_prepared
                                                            : std::vector<std::string>{paths::prepared(r, s.name)};
                for (auto seed : config_.training.seeds) inputs.push_back(paths::dump(r, s.name, f, seed));
                cell(sum, Stage::Evaluate, cell_name(r, s.name, f), inputs, [&] {
                    const auto data = pipeline::load_prepared(root() / paths::prepared(r, s.name));
                    const auto bench = evaluation::seasonal_naive(data.test_series().prices(), config_.seasonal_lag);
                    const auto pool = thresholds_source(r);
                    std::vector<evaluation::MetricSet> per_seed;
                    std::vector<evaluation::SubsetReport> subsets;
                    std::vector<evaluation::IntradayProfile> profiles;
                    std::vector<std::string> dumps;
                    for (auto seed : config_.training.seeds) {
                        const auto path = paths::dump(r, s.name, f, seed);
                        const auto dump = evaluation::read_dump(root() / path);
                        const auto masks = evaluation::subset_masks(dump, pool, config_.tail_percent);
                        const auto e = evaluation::evaluate_dump(dump, bench, masks);
                        per_seed.push_back(e.metrics);
                        subsets.push_back(e.subsets);
                        profiles.push_back(e.intraday);
                        dumps.push_back(path);
                    }
                    json out{{"config_hash", hash_},
                             {"region", std::string(to_string(r))},
                             {"setting", s.name},
                             {"family", models::to_string(f)},
                             {"seasonal_naive", bench},
                             {"metrics", evaluation::aggregate(per_seed)},
                             {"subsets", evaluation::mean_of(subsets)},
                             {"subsets_per_seed", subsets},
                             {"intraday", mean_profile(profiles)},
                             {"dumps", dumps}};
                    const auto path = paths::evaluation(r, s.name, f);
                    write_json(root() / path, out);
                    return std::vector<std::string>{path};
                });
            }
        }
    }
    return sum;
}

StageSummary Experiment::report() {
    StageSummary sum;
    std::vector<std::string> inputs;
    for (Region r : config_.regions)
        for (const auto& s : config_.settings) {
            if (std::filesystem::exists(root() / paths::diagnostics(r, s.name)))
                inputs.push_back(paths::diagnostics(r, s.name));
            for (ModelFamily f : config_.families)
                if (std::filesystem::exists(root() / paths::evaluation(r, s.name, f)))
                    inputs.push_back(paths::evaluation(r, s.name, f));
        }
    cell(sum, Stage::Report, "", inputs, [&] {
        ReportInput in;
        in.config_hash = hash_;
        in.regions = config_.regions;
        in.families = config_.families;
        for (const auto& s : config_.settings) in.settings.push_back(s.name);
        for (const auto& path : inputs) {
            const auto j = read_json(root() / path);
            const Region r = parse_region(j.at("region").get<std::string>());
            const auto setting = j.at("setting").get<std::string>();
            if (j.contains("family")) {
                CellResult c;
                c.region = r;
                c.setting = setting;
                c.family = models::parse_family(j.at("family").get<std::string>());
                j.at("metrics").get_to(c.overall);
                j.at("subsets").get_to(c.subsets);
                j.at("intraday").get_to(c.intraday);
                c.dumps = j.at("dumps").get<std::vector<std::string>>();
                in.cells.push_back(std::move(c));
            } else {
                RegionDiagnostics d;
                d.region = r;
                d.setting = setting;
                j.at("seasonal_naive").get_to(d.benchmark);
                j.at("diurnal").get_to(d.diurnal);
                in.diagnostics.push_back(std::move(d));
            }
        }
        const auto dir = std::filesystem::path(paths::kReportDir);
        // stale files from an earlier configuration must not linger
        std::filesystem::remove_all(root() / dir);
        std::vector<std::string> outputs;
        for (const auto& f : emit_report(in, root() / dir)) outputs.push_back((dir / f).string());
        return outputs;
    });
    return sum;
}

}  // namespace epf::bench
