#include "epf/bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>

#include <nlohmann/json.hpp>

#include "epf/bench/plot.hpp"
#include "epf/error.hpp"
#include "epf/io/columnar.hpp"

namespace epf::bench {

using evaluation::IntradayProfile;
using evaluation::MetricSet;
using evaluation::PointMetrics;

std::vector<Flag> rank_flags(const std::vector<double>& values, bool higher_is_better) {
    std::vector<double> shown;
    for (double v : values) shown.push_back(std::stod(fixed3(higher_is_better ? -v : v)));
    std::vector<double> distinct = shown;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<Flag> flags(values.size(), Flag::None);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!distinct.empty() && shown[i] == distinct[0]) flags[i] = Flag::Best;
        else if (distinct.size() > 1 && shown[i] == distinct[1]) flags[i] = Flag::Second;
    }
    return flags;
}

IntradayProfile mean_profile(const std::vector<IntradayProfile>& profiles) {
    IntradayProfile out;
    if (profiles.empty()) return out;
    for (std::size_t k = 0; k < out.intervals.size(); ++k) {
        auto& slot = out.intervals[k];
        slot.count = profiles.front().intervals[k].count;
        slot.pair_count = profiles.front().intervals[k].pair_count;
        std::vector<std::optional<PointMetrics>> pts;
        bool have_mda = true;
        double mda = 0.0;
        for (const auto& p : profiles) {
            pts.push_back(p.intervals[k].point);
            if (p.intervals[k].mda) mda += *p.intervals[k].mda;
            else have_mda = false;
        }
        slot.point = evaluation::mean_of(pts);
        if (have_mda) slot.mda = mda / static_cast<double>(profiles.size());
    }
    return out;
}

namespace {

struct Metric {
    const char* name;
    double MetricSet::*field;
    bool higher_is_better;
};

constexpr Metric kMetrics[] = {{"MAE", &MetricSet::mae, false},
                               {"RMSE", &MetricSet::rmse, false},
                               {"sMAPE", &MetricSet::smape, false},
                               {"rMAE", &MetricSet::rmae, false},
                               {"MDA", &MetricSet::mda, true}};

struct PointField {
    const char* name;
    double PointMetrics::*field;
};

constexpr PointField kPointFields[] = {
    {"MAE", &PointMetrics::mae}, {"RMSE", &PointMetrics::rmse}, {"sMAPE", &PointMetrics::smape}};

std::string flag_name(Flag f) { return f == Flag::Best ? "best" : f == Flag::Second ? "second" : ""; }

std::string decorate(const std::string& v, Flag f) {
    if (f == Flag::Best) return "**" + v + "**";
    if (f == Flag::Second) return "_" + v + "_";
    return v;
}

class Writer {
public:
    explicit Writer(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }
    void write(const std::string& name, const std::string& text) {
        io::write_text_atomic(dir_ / name, text);
        files_.push_back(name);
    }
    [[nodiscard]] std::vector<std::string> files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

// Row key of a table: a region name or "Average".
using RowValues = std::map<std::string, std::optional<MetricSet>>;

class Cells {
public:
    explicit Cells(const ReportInput& in) : in_(in) {}

    [[nodiscard]] const CellResult* find(Region r, const std::string& s, models::ModelFamily f) const {
        for (const auto& c : in_.cells)
            if (c.region == r && c.setting == s && c.family == f) return &c;
        return nullptr;
    }

    // Unweighted mean over regions that have the value; absent if none do.
    template <class Get>
    [[nodiscard]] std::optional<double> average(const std::string& s, models::ModelFamily f, Get get) const {
        double sum = 0.0;
        std::size_t n = 0;
        for (Region r : in_.regions) {
            if (const auto* c = find(r, s, f)) {
                if (auto v = get(*c)) {
                    sum += *v;
                    ++n;
                }
            }
        }
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    }

private:
    const ReportInput& in_;
};

// One markdown+CSV table. `value(row_region_or_nullopt, setting, family, column)`
// yields the entry; nullopt renders as n/a and is left out of the flags.
struct TableSpec {
    std::string title;
    std::vector<std::string> columns;
    std::vector<bool> higher_is_better;
    std::function<std::optional<double>(std::optional<Region>, const std::string&, models::ModelFamily, std::size_t)>
        value;
};

void write_table(Writer& w, const ReportInput& in, const TableSpec& t, const std::string& stem) {
    std::string md = "# " + t.title + "\n\nconfig " + in.config_hash + "\n\n| Region | Model |";
    std::string sep = "|---|---|";
    for (const auto& s : in.settings)
        for (const auto& c : t.columns) {
            md += " " + s + " " + c + " |";
            sep += "---:|";
        }
    md += "\n" + sep + "\n";
    std::string csv = "setting,region,model,metric,value,flag\n";

    std::vector<std::optional<Region>> rows(in.regions.begin(), in.regions.end());
    rows.push_back(std::nullopt);  // Average block
    for (const auto& row : rows) {
        const std::string row_name = row ? std::string(to_string(*row)) : "Average";
        // flags per (setting, column) across families
        std::map<std::pair<std::size_t, std::size_t>, std::vector<Flag>> flags;
        std::map<std::pair<std::size_t, std::size_t>, std::vector<std::optional<double>>> values;
        for (std::size_t si = 0; si < in.settings.size(); ++si) {
            for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
                std::vector<std::optional<double>> col;
                std::vector<double> present;
                for (auto f : in.families) {
                    col.push_back(t.value(row, in.settings[si], f, ci));
                    if (col.back()) present.push_back(*col.back());
                }
                const auto pf = rank_flags(present, t.higher_is_better[ci]);
                std::vector<Flag> full;
                std::size_t p = 0;
                for (const auto& v : col) full.push_back(v ? pf[p++] : Flag::None);
                flags[{si, ci}] = full;
                values[{si, ci}] = col;
            }
        }
        for (std::size_t fi = 0; fi < in.families.size(); ++fi) {
            const auto fam = models::to_string(in.families[fi]);
            md += "| " + row_name + " | " + fam + " |";
            for (std::size_t si = 0; si < in.settings.size(); ++si) {
                for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
                    const auto& v = values[{si, ci}][fi];
                    const Flag fl = flags[{si, ci}][fi];
                    md += " " + (v ? decorate(fixed3(*v), fl) : std::string("n/a")) + " |";
                    csv += in.settings[si] + "," + row_name + "," + fam + "," + t.columns[ci] + "," +
                           (v ? fixed3(*v) : std::string("")) + "," + flag_name(fl) + "\n";
                }
            }
            md += "\n";
        }
    }
    md += "\nBest per group in bold, second best in italics.";
    bool any_higher = false;
    for (bool h : t.higher_is_better) any_higher = any_higher || h;
    if (any_higher) md += " Higher is better for MDA, lower for every other metric.";
    md += "\n";
    w.write(stem + ".md", md);
    w.write(stem + ".csv", csv);
}

std::vector<std::optional<double>> slot_values(const IntradayProfile& p,
                                               const std::function<std::optional<double>(const evaluation::IntervalScores&)>& get) {
    std::vector<std::optional<double>> out;
    for (const auto& s : p.intervals) out.push_back(get(s));
    return out;
}

std::vector<double> slot_axis() {
    std::vector<double> x;
    for (int k = 0; k < evaluation::kIntervals; ++k) x.push_back(k);
    return x;
}

void write_plot(Writer& w, const std::string& stem, const PlotData& data, const PlotStyle& style) {
    const std::string csv = to_csv(data);
    w.write(stem + ".csv", csv);
    // the figure is rendered from the data file contents, never from memory
    w.write(stem + ".svg", render_svg(parse_plot_csv(csv), style));
}

}  // namespace

std::vector<std::string> emit_report(const ReportInput& in, const std::filesystem::path& dir) {
    if (in.cells.empty()) throw NothingToReport("no evaluated cells to report");
    Writer w(dir);
    Cells cells(in);

    // overall metrics
    TableSpec overall;
    overall.title = "Forecast accuracy per region and model (A$/MWh)";
    for (const auto& m : kMetrics) {
        overall.columns.push_back(m.name);
        overall.higher_is_better.push_back(m.higher_is_better);
    }
    overall.value = [&](std::optional<Region> r, const std::string& s, models::ModelFamily f,
                        std::size_t ci) -> std::optional<double> {
        auto field = kMetrics[ci].field;
        auto get = [field](const CellResult& c) -> std::optional<double> { return c.overall.mean.*field; };
        if (!r) return cells.average(s, f, get);
        const auto* c = cells.find(*r, s, f);
        return c ? get(*c) : std::nullopt;
    };
    write_table(w, in, overall, "table_overall");

    // subset tables
    auto subset_table = [&](const std::string& title, std::optional<PointMetrics> evaluation::SubsetReport::*member,
                            const std::string& stem) {
        TableSpec t;
        t.title = title;
        for (const auto& p : kPointFields) {
            t.columns.push_back(p.name);
            t.higher_is_better.push_back(false);
        }
        t.value = [&, member](std::optional<Region> r, const std::string& s, models::ModelFamily f,
                              std::size_t ci) -> std::optional<double> {
            auto field = kPointFields[ci].field;
            auto get = [member, field](const CellResult& c) -> std::optional<double> {
                const auto& m = c.subsets.*member;
                return m ? std::optional<double>((*m).*field) : std::nullopt;
            };
            if (!r) return cells.average(s, f, get);
            const auto* c = cells.find(*r, s, f);
            return c ? get(*c) : std::nullopt;
        };
        write_table(w, in, t, stem);
    };
    subset_table("Extreme prices (upper and lower tails pooled)", &evaluation::SubsetReport::extreme,
                 "table_extreme");
    subset_table("Negative prices", &evaluation::SubsetReport::negative, "table_negative");

    // per-slot figures
    const std::pair<double, double> evening{32.0, 41.0};
    for (Region r : in.regions) {
        const std::string rn(to_string(r));
        for (const auto& s : in.settings) {
            const std::string tag = rn + "_" + s;
            struct SlotMetric {
                const char* stem;
                const char* label;
                std::function<std::optional<double>(const evaluation::IntervalScores&)> get;
            };
            const SlotMetric slot_metrics[] = {
                {"intraday_mae", "MAE (A$/MWh)",
                 [](const auto& sc) { return sc.point ? std::optional<double>(sc.point->mae) : std::nullopt; }},
                {"intraday_rmse", "RMSE (A$/MWh)",
                 [](const auto& sc) { return sc.point ? std::optional<double>(sc.point->rmse) : std::nullopt; }},
                {"intraday_smape", "sMAPE (%)",
                 [](const auto& sc) { return sc.point ? std::optional<double>(sc.point->smape) : std::nullopt; }},
                {"intraday_mda", "MDA (%)", [](const auto& sc) { return sc.mda; }},
            };
            for (const auto& m : slot_metrics) {
                PlotData d;
                d.x = slot_axis();
                for (auto f : in.families)
                    if (const auto* c = cells.find(r, s, f)) d.add_series(models::to_string(f), slot_values(c->intraday, m.get));
                if (d.series.empty()) continue;
                write_plot(w, m.stem + std::string("_") + tag, d,
                           {rn + " " + s + ": " + m.label + " per half-hour", m.label, evening, true});
            }
            for (const auto& diag : in.diagnostics) {
                if (diag.region != r || diag.setting != s) continue;
                auto column = [&](double evaluation::DiurnalRow::*field) {
                    std::vector<std::optional<double>> v;
                    for (const auto& row : diag.diurnal.intervals) v.push_back(row.*field);
                    return v;
                };
                PlotData vol;
                vol.x = slot_axis();
                vol.add_series("price_change_std", column(&evaluation::DiurnalRow::price_change_std));
                vol.add_series("mean_price", column(&evaluation::DiurnalRow::mean_price));
                write_plot(w, "diurnal_volatility_" + tag, vol,
                           {rn + " " + s + ": price change std and mean price", "A$/MWh", evening, true});
                PlotData neg;
                neg.x = slot_axis();
                neg.add_series("pct_negative", column(&evaluation::DiurnalRow::pct_negative));
                write_plot(w, "diurnal_negative_" + tag, neg,
                           {rn + " " + s + ": share of negative prices", "%", std::nullopt, true});
                PlotData dir_;
                dir_.x = slot_axis();
                dir_.add_series("pct_directional_shift", column(&evaluation::DiurnalRow::pct_directional_shift));
                write_plot(w, "diurnal_direction_" + tag, dir_,
                           {rn + " " + s + ": share of direction changes", "%", std::nullopt, true});
            }
        }
    }

    // machine-readable summary
    nlohmann::json summary{{"config_hash", in.config_hash}, {"cells", nlohmann::json::array()},
                           {"benchmarks", nlohmann::json::array()}};
    for (const auto& c : in.cells) {
        summary["cells"].push_back({{"region", std::string(to_string(c.region))},
                                    {"setting", c.setting},
                                    {"family", models::to_string(c.family)},
                                    {"metrics", c.overall},
                                    {"subsets", c.subsets},
                                    {"dumps", c.dumps}});
    }
    for (const auto& d : in.diagnostics) {
        summary["benchmarks"].push_back(
            {{"region", std::string(to_string(d.region))}, {"setting", d.setting}, {"seasonal_naive", d.benchmark}});
    }
    w.write("summary.json", summary.dump(2) + "\n");
    return w.files();
}

}  // namespace epf::bench
