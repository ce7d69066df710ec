#include "epf/pipeline/prepared.hpp"

#include <nlohmann/json.hpp>

#include "epf/error.hpp"
#include "epf/io/columnar.hpp"

namespace epf::pipeline {

namespace {

constexpr int kManifestVersion = 1;

void check_segment(const char* name, IndexRange r, std::size_t need) {
    if (r.size() < need) {
        throw SegmentTooShort(std::string(name) + " partition holds " + std::to_string(r.size()) +
                              " rows, a window needs " + std::to_string(need));
    }
}

nlohmann::json range_json(IndexRange r) { return {{"begin", r.begin}, {"end", r.end}}; }
IndexRange range_from(const nlohmann::json& j) { return {j.at("begin").get<std::size_t>(), j.at("end").get<std::size_t>()}; }

}  // namespace

PreparedDataset::PreparedDataset(HalfHourlySeries series, std::size_t lookback, std::size_t horizon,
                                 DatasetSplit split, ScalerParams scaler)
    : series_(std::move(series)), lookback_(lookback), horizon_(horizon), split_(split), scaler_(std::move(scaler)) {
    if (split_.test.end != series_.size()) throw RangeError("split does not cover the series");
    const std::size_t need = lookback_ + horizon_;
    check_segment("train", split_.train, need);
    check_segment("validation", split_.val, need);
    check_segment("test", split_.test, need);
    auto full = std::make_shared<FeatureMatrix>(apply_scaler(add_time_features(series_), scaler_));
    price_only_ = std::make_shared<FeatureMatrix>(full->select(false));
    full_ = std::move(full);
}

const FeatureMatrix& PreparedDataset::scaled(bool with_time_features) const {
    return with_time_features ? *full_ : *price_only_;
}

WindowSet PreparedDataset::windows(IndexRange segment, bool with_time_features) const {
    return build_windows(with_time_features ? full_ : price_only_, segment, lookback_, horizon_);
}

WindowSet PreparedDataset::train_windows(bool t) const { return windows(split_.train, t); }
WindowSet PreparedDataset::val_windows(bool t) const { return windows(split_.val, t); }
WindowSet PreparedDataset::test_windows(bool t) const { return windows(split_.test, t); }

HalfHourlySeries PreparedDataset::test_series() const {
    return series_.slice(split_.test.begin, split_.test.size());
}

PreparedDataset prepare_dataset(const HalfHourlySeries& series, const PrepareOptions& options) {
    const auto split = chronological_split(series, options.test_start, options.train_fraction);
    auto scaler = fit_scaler(add_time_features(series), split, options.scaler_fit);
    return PreparedDataset(series, options.lookback, options.horizon, split, std::move(scaler));
}

void save_prepared(const std::filesystem::path& path, const PreparedDataset& data) {
    io::ColumnarTable table;
    const auto prices = data.series().prices();
    table.add_float64("price", std::vector<double>(prices.begin(), prices.end()));
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    io::write_columnar(path, table);

    const auto& s = data.scaler();
    nlohmann::json scaler{{"columns", kFeatureColumns},
                          {"min", s.min},
                          {"max", s.max},
                          {"degenerate", s.degenerate},
                          {"fitted_on", s.fitted_on}};
    const nlohmann::json manifest{{"version", kManifestVersion},
                                  {"region", std::string(to_string(data.region()))},
                                  {"start", format_market_time(data.series().start())},
                                  {"start_epoch", epoch_seconds(data.series().start())},
                                  {"rows", data.series().size()},
                                  {"lookback", data.lookback()},
                                  {"horizon", data.horizon()},
                                  {"split",
                                   {{"train", range_json(data.split().train)},
                                    {"val", range_json(data.split().val)},
                                    {"test", range_json(data.split().test)}}},
                                  {"scaler", scaler}};
    io::write_text_atomic(path.string() + ".json", manifest.dump(2));
}

PreparedDataset load_prepared(const std::filesystem::path& path) {
    const auto m = nlohmann::json::parse(io::read_text(path.string() + ".json"));
    if (m.at("version").get<int>() != kManifestVersion) throw FormatError("unsupported prepared dataset version");
    const auto table = io::read_columnar(path);
    HalfHourlySeries series(parse_region(m.at("region").get<std::string>()),
                            from_epoch_seconds(m.at("start_epoch").get<std::int64_t>()), table.float64("price"));
    if (series.size() != m.at("rows").get<std::size_t>()) throw IntegrityError("prepared dataset row count mismatch");
    const auto& sp = m.at("split");
    DatasetSplit split{range_from(sp.at("train")), range_from(sp.at("val")), range_from(sp.at("test"))};
    const auto& sc = m.at("scaler");
    ScalerParams scaler{sc.at("min").get<std::vector<double>>(), sc.at("max").get<std::vector<double>>(),
                        sc.at("degenerate").get<std::vector<bool>>(), sc.at("fitted_on").get<std::string>()};
    return PreparedDataset(std::move(series), m.at("lookback").get<std::size_t>(), m.at("horizon").get<std::size_t>(),
                           split, std::move(scaler));
}

}  // namespace epf::pipeline
