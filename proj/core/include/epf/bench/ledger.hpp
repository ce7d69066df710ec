#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace epf::bench {

enum class StageStatus { Ok, Failed, Skipped };

[[nodiscard]] std::string to_string(StageStatus s);

struct LedgerRecord {
    std::string config_hash;
    std::string stage;
    std::string cell;  // e.g. "QLD/24H/DLINEAR"; "" for experiment-wide stages
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;  // paths relative to the output dir
    double wall_time_s = 0.0;
    StageStatus status = StageStatus::Ok;
    std::string error;
};

void to_json(nlohmann::json& j, const LedgerRecord& r);
void from_json(const nlohmann::json& j, LedgerRecord& r);

// Append-only JSON-lines log. Appends are serialised through one mutex and
// flushed line by line, so a crash loses at most the record being written.
class RunLedger {
public:
    // Loads existing records from `path` if the file exists.
    explicit RunLedger(std::filesystem::path path);

    void append(const LedgerRecord& record);

    // Latest Ok record for (hash, stage, cell) whose outputs all still exist
    // under `root`.
    [[nodiscard]] std::optional<LedgerRecord> completed(const std::string& hash, const std::string& stage,
                                                        const std::string& cell,
                                                        const std::filesystem::path& root) const;

    [[nodiscard]] std::vector<LedgerRecord> records() const;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::vector<LedgerRecord> records_;
};

}  // namespace epf::bench
