#include "epf/bench/ledger.hpp"

#include <fstream>
#include <optional>

#include "epf/error.hpp"

namespace epf::bench {

std::string to_string(StageStatus s) {
    switch (s) {
        case StageStatus::Ok: return "ok";
        case StageStatus::Failed: return "failed";
        case StageStatus::Skipped: return "skipped";
    }
    return "?";
}

void to_json(nlohmann::json& j, const LedgerRecord& r) {
    j = {{"config_hash", r.config_hash}, {"stage", r.stage},     {"cell", r.cell},
         {"inputs", r.inputs},           {"outputs", r.outputs}, {"wall_time_s", r.wall_time_s},
         {"status", to_string(r.status)}};
    if (!r.error.empty()) j["error"] = r.error;
}

void from_json(const nlohmann::json& j, LedgerRecord& r) {
    j.at("config_hash").get_to(r.config_hash);
    j.at("stage").get_to(r.stage);
    j.at("cell").get_to(r.cell);
    j.at("inputs").get_to(r.inputs);
    j.at("outputs").get_to(r.outputs);
    j.at("wall_time_s").get_to(r.wall_time_s);
    const auto s = j.at("status").get<std::string>();
    r.status = s == "ok" ? StageStatus::Ok : s == "skipped" ? StageStatus::Skipped : StageStatus::Failed;
    r.error = j.value("error", std::string());
}

RunLedger::RunLedger(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    std::size_t n = 0;
    std::streamoff offset = 0;
    std::optional<std::streamoff> torn;
    while (std::getline(in, line)) {
        ++n;
        const std::streamoff start = offset;
        offset += static_cast<std::streamoff>(line.size()) + 1;
        if (line.empty()) continue;
        try {
            records_.push_back(nlohmann::json::parse(line).get<LedgerRecord>());
        } catch (const nlohmann::json::exception&) {
            // a torn final line from an interrupted run is dropped
            if (in.peek() != std::char_traits<char>::eof())
                throw FormatError(path_.string() + ": corrupt ledger line " + std::to_string(n));
            torn = start;
        }
    }
    in.close();
    // cut it off so the next append starts on a clean line
    if (torn) {
        std::filesystem::resize_file(path_, static_cast<std::uintmax_t>(*torn));
    } else if (n > 0 && static_cast<std::uintmax_t>(offset) > std::filesystem::file_size(path_)) {
        std::ofstream(path_, std::ios::app) << '\n';
    }
}

void RunLedger::append(const LedgerRecord& record) {
    std::lock_guard lock(mutex_);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw FormatError("cannot append to ledger " + path_.string());
    out << nlohmann::json(record).dump() << '\n';
    out.flush();
    records_.push_back(record);
}

std::optional<LedgerRecord> RunLedger::completed(const std::string& hash, const std::string& stage,
                                                 const std::string& cell, const std::filesystem::path& root) const {
    std::lock_guard lock(mutex_);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (it->config_hash != hash || it->stage != stage || it->cell != cell) continue;
        if (it->status == StageStatus::Failed) return std::nullopt;
        if (it->status != StageStatus::Ok) continue;
        for (const auto& o : it->outputs)
            if (!std::filesystem::exists(root / o)) return std::nullopt;
        return *it;
    }
    return std::nullopt;
}

std::vector<LedgerRecord> RunLedger::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

}  // namespace epf::bench
