#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "epf/bench/config.hpp"
#include "epf/bench/ledger.hpp"
#include "epf/market_data/aemo.hpp"

namespace epf::bench {

enum class Stage { Fetch, Prepare, Tune, Train, Evaluate, Report };

inline constexpr Stage kAllStages[] = {Stage::Fetch, Stage::Prepare, Stage::Tune,
                                       Stage::Train, Stage::Evaluate, Stage::Report};

[[nodiscard]] std::string to_string(Stage s);
// ConfigError on an unknown name.
[[nodiscard]] Stage parse_stage(const std::string& name);

struct StageSummary {
    std::size_t ok = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;

    StageSummary& operator+=(const StageSummary& o) {
        ok += o.ok;
        skipped += o.skipped;
        failed += o.failed;
        return *this;
    }
};

// Runs the stages of one configuration inside its output directory. Every
// (region, setting, family) cell is isolated: a failure is written to the
// ledger and the cell's downstream stages fail on the missing inputs while
// other cells proceed. A stage whose last Ok record carries the same config
// hash, the same inputs and outputs that still exist is skipped.
class Experiment {
public:
    // Validates the config (ConfigError), writes <out>/config.json and opens
    // <out>/ledger.jsonl. `transport` is only used by fetch with the AEMO
    // source; nullptr means libcurl.
    explicit Experiment(ExperimentConfig config, std::shared_ptr<Transport> transport = nullptr);

    StageSummary run(Stage stage);
    StageSummary run_all();

    [[nodiscard]] const ExperimentConfig& config() const { return config_; }
    [[nodiscard]] const std::string& hash() const { return hash_; }
    [[nodiscard]] const RunLedger& ledger() const { return ledger_; }
    [[nodiscard]] const std::filesystem::path& root() const { return config_.output_dir; }

    // Progress lines ("stage cell status"); silent by default.
    void set_log(std::function<void(const std::string&)> log) { log_ = std::move(log); }

private:
    StageSummary fetch();
    StageSummary prepare();
    StageSummary tune();
    StageSummary train();
    StageSummary evaluate();
    StageSummary report();

    // Runs `body` unless up to date. `body` returns output paths relative to
    // the root.
    void cell(StageSummary& summary, Stage stage, const std::string& cell_name, std::vector<std::string> inputs,
              const std::function<std::vector<std::string>()>& body);

    ExperimentConfig config_;
    std::string hash_;
    RunLedger ledger_;
    std::shared_ptr<Transport> transport_;
    std::function<void(const std::string&)> log_;
};

// Artifact paths, relative to the output directory.
namespace paths {
[[nodiscard]] std::string series(Region r);
[[nodiscard]] std::string prepared(Region r, const std::string& setting);
[[nodiscard]] std::string tuned(Region r, const std::string& setting, models::ModelFamily f);
[[nodiscard]] std::string run_dir(Region r, const std::string& setting, models::ModelFamily f);
[[nodiscard]] std::string dump(Region r, const std::string& setting, models::ModelFamily f, std::uint64_t seed);
[[nodiscard]] std::string checkpoint(Region r, const std::string& setting, models::ModelFamily f, std::uint64_t seed);
[[nodiscard]] std::string run_manifest(Region r, const std::string& setting, models::ModelFamily f,
                                       std::uint64_t seed);
[[nodiscard]] std::string evaluation(Region r, const std::string& setting, models::ModelFamily f);
[[nodiscard]] std::string diagnostics(Region r, const std::string& setting);
inline constexpr const char* kReportDir = "report";
}  // namespace paths

// Compiler and architecture string stamped into run manifests.
[[nodiscard]] std::string platform_string();

}  // namespace epf::bench
