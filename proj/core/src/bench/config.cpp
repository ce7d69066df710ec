#include "epf/bench/config.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <cstdlib>
#include <set>

#include "epf/error.hpp"
#include "epf/io/columnar.hpp"
#include "epf/market_data/aemo.hpp"

namespace epf::bench {

using nlohmann::json;

Setting parse_setting(const std::string& name) {
    std::string up;
    for (char c : name) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "24H") return {"24H", 336, 48};
    if (up == "48H") return {"48H", 672, 96};
    throw ConfigError("unknown setting '" + name + "' (expected 24H or 48H)");
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

json spec_json(const SyntheticSpec& s) {
    json j{{"base_level", s.base_level},   {"daily_amplitude", s.daily_amplitude},
           {"weekly_amplitude", s.weekly_amplitude}, {"noise_std", s.noise_std},
           {"spike_rate", s.spike_rate},   {"spike_scale", s.spike_scale}};
    if (s.negative_band) {
        j["negative_band"] = {{"start_interval", s.negative_band->start_interval},
                              {"end_interval", s.negative_band->end_interval},
                              {"probability", s.negative_band->probability}};
    }
    if (s.volatility_band) {
        j["volatility_band"] = {{"start_interval", s.volatility_band->start_interval},
                                {"end_interval", s.volatility_band->end_interval},
                                {"extra_std", s.volatility_band->extra_std}};
    }
    return j;
}

SyntheticSpec spec_from(const json& j) {
    reject_unknown(j, {"base_level", "daily_amplitude", "weekly_amplitude", "noise_std", "spike_rate",
                       "spike_scale", "negative_band", "volatility_band"},
                   "data.synthetic");
    SyntheticSpec s;
    s.base_level = j.value("base_level", s.base_level);
    s.daily_amplitude = j.value("daily_amplitude", s.daily_amplitude);
    s.weekly_amplitude = j.value("weekly_amplitude", s.weekly_amplitude);
    s.noise_std = j.value("noise_std", s.noise_std);
    s.spike_rate = j.value("spike_rate", s.spike_rate);
    s.spike_scale = j.value("spike_scale", s.spike_scale);
    if (j.contains("negative_band")) {
        const auto& b = j.at("negative_band");
        reject_unknown(b, {"start_interval", "end_interval", "probability"}, "negative_band");
        s.negative_band = NegativePriceBand{b.at("start_interval"), b.at("end_interval"), b.at("probability")};
    }
    if (j.contains("volatility_band")) {
        const auto& b = j.at("volatility_band");
        reject_unknown(b, {"start_interval", "end_interval", "extra_std"}, "volatility_band");
        s.volatility_band = VolatilityBand{b.at("start_interval"), b.at("end_interval"), b.at("extra_std")};
    }
    return s;
}

json canonical(const ExperimentConfig& c, bool for_hash) {
    json j = c;
    if (for_hash) {
        j.erase("output_dir");
        j["training"].erase("workers");
        j["data"].erase("cache_dir");
    }
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (regions.empty()) throw ConfigError("at least one region is required");
    if (settings.empty()) throw ConfigError("at least one setting is required");
    if (families.empty()) throw ConfigError("at least one model family is required");
    for (const auto& s : settings) (void)parse_setting(s.name);
    if (std::set<Region>(regions.begin(), regions.end()).size() != regions.size())
        throw ConfigError("duplicate region");
    if (std::set<models::ModelFamily>(families.begin(), families.end()).size() != families.size())
        throw ConfigError("duplicate model family");
    if (!data.start.ok() || !data.end.ok() || data.end < data.start) throw ConfigError("invalid data date range");
    if (!(test_start > data.start && test_start <= data.end)) throw ConfigError("test_start must lie inside the data range");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
    if (data.kind == DataSourceKind::Aemo && data.start < kArchiveFirstDay)
        throw ConfigError("AEMO data starts at " + format_date(kArchiveFirstDay));
    if (data.kind == DataSourceKind::Synthetic) {
        try {
            auto spec = data.synthetic;
            spec.n_days = static_cast<int>(days_inclusive(data.start, data.end));
            spec.start_date = data.start;
            spec.validate();
        } catch (const SpecError& e) {
            throw ConfigError(std::string("synthetic spec: ") + e.what());
        }
    }
    try {
        training.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("training: ") + e.what());
    }
    if (budget && *budget == 0) throw ConfigError("budget must be at least 1");
    if (search) {
        if (grid.learning_rates.empty()) throw ConfigError("grid needs at least one learning rate");
        for (auto f : families) {
            models::ModelConfig base;
            base.lookback = settings.front().lookback;
            base.horizon = settings.front().horizon;
            (void)training::enumerate_grid(f, grid, base);
        }
    } else if (!(fixed.learning_rate > 0.0)) {
        throw ConfigError("fixed learning_rate must be positive");
    }
    if (!(tail_percent > 0.0 && tail_percent < 50.0)) throw ConfigError("tail_percent must lie in (0, 50)");
    if (seasonal_lag == 0) throw ConfigError("seasonal_lag must be positive");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical(*this, true).dump()); }

void to_json(json& j, const ExperimentConfig& c) {
    json regions = json::array(), families = json::array(), settings = json::array();
    for (auto r : c.regions) regions.push_back(std::string(to_string(r)));
    for (auto f : c.families) families.push_back(models::to_string(f));
    for (const auto& s : c.settings) settings.push_back(s.name);
    json data{{"source", c.data.kind == DataSourceKind::Aemo ? "aemo" : "synthetic"},
              {"start", format_date(c.data.start)},
              {"end", format_date(c.data.end)},
              {"seed", c.data.seed},
              {"synthetic", spec_json(c.data.synthetic)}};
    if (c.data.cache_dir) data["cache_dir"] = c.data.cache_dir->string();
    json search{{"enabled", c.search}, {"budget", c.budget ? json(*c.budget) : json(nullptr)}};
    json fixed{{"learning_rate", c.fixed.learning_rate},
               {"model_dim", c.fixed.model_dim},
               {"n_layers", c.fixed.n_layers},
               {"cnn_filters", c.fixed.cnn_filters},
               {"cnn_kernel", c.fixed.cnn_kernel}};
    j = {{"regions", regions},
         {"settings", settings},
         {"families", families},
         {"data", data},
         {"split",
          {{"test_start", format_date(c.test_start)},
           {"train_fraction", c.train_fraction},
           {"scaler_fit", c.scaler_fit == pipeline::ScalerFit::Train ? "train" : "train+val"}}},
         {"training", c.training},
         {"grid", c.grid},
         {"search", search},
         {"fixed", fixed},
         {"evaluation",
          {{"tail_percent", c.tail_percent},
           {"tail_scope", c.tail_scope == TailScope::Region ? "region" : "global"},
           {"seasonal_lag", c.seasonal_lag}}},
         {"output_dir", c.output_dir.string()}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        reject_unknown(j, {"regions", "settings", "families", "data", "split", "training", "grid", "search", "fixed",
                           "evaluation", "output_dir"},
                       "config");
        if (j.contains("regions")) {
            c.regions.clear();
            for (const auto& r : j.at("regions")) c.regions.push_back(parse_region(r.get<std::string>()));
        }
        if (j.contains("settings")) {
            c.settings.clear();
            for (const auto& s : j.at("settings")) c.settings.push_back(parse_setting(s.get<std::string>()));
        }
        if (j.contains("families")) {
            c.families.clear();
            for (const auto& f : j.at("families")) c.families.push_back(models::parse_family(f.get<std::string>()));
        }
        if (j.contains("data")) {
            const auto& d = j.at("data");
            reject_unknown(d, {"source", "start", "end", "seed", "synthetic", "cache_dir"}, "data");
            const auto source = d.value("source", std::string("synthetic"));
            if (source == "aemo") c.data.kind = DataSourceKind::Aemo;
            else if (source == "synthetic") c.data.kind = DataSourceKind::Synthetic;
            else throw ConfigError("data.source must be 'aemo' or 'synthetic'");
            if (d.contains("start")) c.data.start = parse_date(d.at("start").get<std::string>());
            if (d.contains("end")) c.data.end = parse_date(d.at("end").get<std::string>());
            c.data.seed = d.value("seed", c.data.seed);
            if (d.contains("synthetic")) c.data.synthetic = spec_from(d.at("synthetic"));
            if (d.contains("cache_dir")) c.data.cache_dir = d.at("cache_dir").get<std::string>();
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            reject_unknown(s, {"test_start", "train_fraction", "scaler_fit"}, "split");
            if (s.contains("test_start")) c.test_start = parse_date(s.at("test_start").get<std::string>());
            c.train_fraction = s.value("train_fraction", c.train_fraction);
            const auto fit = s.value("scaler_fit", std::string("train"));
            if (fit == "train") c.scaler_fit = pipeline::ScalerFit::Train;
            else if (fit == "train+val") c.scaler_fit = pipeline::ScalerFit::TrainVal;
            else throw ConfigError("split.scaler_fit must be 'train' or 'train+val'");
        }
        if (j.contains("training")) {
            reject_unknown(j.at("training"),
                           {"learning_rate", "batch_size", "max_epochs", "early_stop_patience", "plateau", "seeds",
                            "search_seed", "workers"},
                           "training");
            j.at("training").get_to(c.training);
        }
        if (j.contains("grid")) {
            reject_unknown(j.at("grid"), {"learning_rates", "dims", "layers", "cnn_kernels", "cnn_filters"}, "grid");
            j.at("grid").get_to(c.grid);
        }
        if (j.contains("search")) {
            const auto& s = j.at("search");
            reject_unknown(s, {"enabled", "budget"}, "search");
            c.search = s.value("enabled", c.search);
            if (s.contains("budget") && !s.at("budget").is_null()) c.budget = s.at("budget").get<std::size_t>();
        }
        if (j.contains("fixed")) {
            const auto& f = j.at("fixed");
            reject_unknown(f, {"learning_rate", "model_dim", "n_layers", "cnn_filters", "cnn_kernel"}, "fixed");
            c.fixed.learning_rate = f.value("learning_rate", c.fixed.learning_rate);
            c.fixed.model_dim = f.value("model_dim", c.fixed.model_dim);
            c.fixed.n_layers = f.value("n_layers", c.fixed.n_layers);
            c.fixed.cnn_filters = f.value("cnn_filters", c.fixed.cnn_filters);
            c.fixed.cnn_kernel = f.value("cnn_kernel", c.fixed.cnn_kernel);
        }
        if (j.contains("evaluation")) {
            const auto& e = j.at("evaluation");
            reject_unknown(e, {"tail_percent", "tail_scope", "seasonal_lag"}, "evaluation");
            c.tail_percent = e.value("tail_percent", c.tail_percent);
            const auto scope = e.value("tail_scope", std::string("region"));
            if (scope == "region") c.tail_scope = TailScope::Region;
            else if (scope == "global") c.tail_scope = TailScope::Global;
            else throw ConfigError("evaluation.tail_scope must be 'region' or 'global'");
            c.seasonal_lag = e.value("seasonal_lag", c.seasonal_lag);
        }
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const RangeError& e) {
        throw ConfigError(std::string("bad date: ") + e.what());
    } catch (const FormatError& e) {
        throw ConfigError(std::string("bad value: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const std::exception& e) {
        throw ConfigError("cannot read config " + path.string() + ": " + e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::filesystem::path resolve_cache_dir(const ExperimentConfig& c) {
    if (const char* env = std::getenv("EPF_CACHE_DIR"); env && *env) return env;
    if (c.data.cache_dir) return *c.data.cache_dir;
    return c.output_dir / "cache";
}

}  // namespace epf::bench
