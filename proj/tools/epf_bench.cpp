#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "epf/bench/experiment.hpp"
#include "epf/error.hpp"
#include "epf/market_data/calendar.hpp"
#include "epf/market_data/summary.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kConfig = 2;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct Overrides {
    std::string config;
    std::string settings;
    std::string regions;
    std::string families;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> workers;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--setting", o.settings, "comma list of settings, e.g. 24H,48H");
    cmd->add_option("--regions", o.regions, "comma list of regions");
    cmd->add_option("--families", o.families, "comma list of model families");
    cmd->add_option("--budget", o.budget, "grid points evaluated per cell");
    cmd->add_option("--seeds", o.seeds, "number of replicate seeds (1..N)");
    cmd->add_option("--workers", o.workers, "parallel training workers");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_flag("-q,--quiet", o.quiet, "no per-cell progress");
}

epf::bench::ExperimentConfig build_config(const Overrides& o) {
    using namespace epf;
    bench::ExperimentConfig c = o.config.empty() ? bench::ExperimentConfig{} : bench::load_config(o.config);
    if (!o.settings.empty()) {
        c.settings.clear();
        for (const auto& s : split_list(o.settings)) c.settings.push_back(bench::parse_setting(s));
    }
    if (!o.regions.empty()) {
        c.regions.clear();
        for (const auto& r : split_list(o.regions)) c.regions.push_back(parse_region(r));
    }
    if (!o.families.empty()) {
        c.families.clear();
        for (const auto& f : split_list(o.families)) c.families.push_back(models::parse_family(f));
    }
    if (o.budget) c.budget = *o.budget;
    if (o.seeds) {
        c.training.seeds.clear();
        for (std::size_t k = 1; k <= *o.seeds; ++k) c.training.seeds.push_back(k);
    }
    if (o.workers) c.training.workers = *o.workers;
    if (!o.out.empty()) c.output_dir = o.out;
    c.validate();
    return c;
}

int run_stages(const Overrides& o, const std::vector<epf::bench::Stage>& stages) {
    epf::bench::Experiment exp(build_config(o));
    if (!o.quiet) exp.set_log([](const std::string& line) { std::cerr << line << '\n'; });
    epf::bench::StageSummary total;
    for (auto s : stages) total += exp.run(s);
    std::cout << "config " << exp.hash() << ": " << total.ok << " ok, " << total.skipped << " up to date, "
              << total.failed << " failed (" << exp.root().string() << ")\n";
    return total.failed ? kPartial : kOk;
}

struct FetchArgs {
    std::string region;
    std::string start;
    std::string end;
    std::string cache;
};

int standalone_fetch(const FetchArgs& a) {
    using namespace epf;
    const Region region = parse_region(a.region);
    const Date start = parse_date(a.start), end = parse_date(a.end);
    std::filesystem::path cache = a.cache;
    if (cache.empty()) {
        const char* env = std::getenv("EPF_CACHE_DIR");
        cache = env && *env ? env : "epf_cache";
    }
    const auto raw = fetch_rrp(region, start, end, cache);
    const auto s = summarize(raw);
    std::cout << to_string(region) << " " << a.start << ".." << a.end << ": " << raw.size()
              << " five-minute prices, mean " << s.mean << ", cached in " << cache.string() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    using epf::bench::Stage;
    CLI::App app{"Multi-horizon NEM electricity price forecasting benchmark"};
    app.require_subcommand(1);

    Overrides o;
    FetchArgs fa;
    auto* fetch = app.add_subcommand("fetch", "download and cache AEMO prices");
    add_common(fetch, o);
    fetch->add_option("--region", fa.region, "single region for a standalone download");
    fetch->add_option("--start", fa.start, "first day, YYYY-MM-DD");
    fetch->add_option("--end", fa.end, "last day, YYYY-MM-DD");
    fetch->add_option("--cache", fa.cache, "cache directory (default $EPF_CACHE_DIR)");

    struct Sub {
        const char* name;
        const char* help;
        std::vector<Stage> stages;
    };
    const std::vector<Sub> subs = {
        {"prepare", "downsample, split and scale", {Stage::Prepare}},
        {"tune", "grid search per cell", {Stage::Tune}},
        {"train", "train every seed with the selected hyperparameters", {Stage::Train}},
        {"evaluate", "score forecast dumps", {Stage::Evaluate}},
        {"report", "emit tables and figures", {Stage::Report}},
        {"run", "all stages, skipping up-to-date ones",
         {Stage::Fetch, Stage::Prepare, Stage::Tune, Stage::Train, Stage::Evaluate, Stage::Report}},
    };
    std::vector<CLI::App*> cmds;
    for (const auto& s : subs) {
        cmds.push_back(app.add_subcommand(s.name, s.help));
        add_common(cmds.back(), o);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (fetch->parsed()) {
            if (!fa.region.empty()) {
                if (fa.start.empty() || fa.end.empty()) throw epf::ConfigError("fetch --region needs --start and --end");
                return standalone_fetch(fa);
            }
            if (o.config.empty()) throw epf::ConfigError("fetch needs --config or --region/--start/--end");
            return run_stages(o, {Stage::Fetch});
        }
        for (std::size_t k = 0; k < subs.size(); ++k)
            if (cmds[k]->parsed()) return run_stages(o, subs[k].stages);
    } catch (const epf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kPartial;
    }
    return kOk;
}
