#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace epf::bench {

// Table behind one line chart. Absent points are empty CSV cells and break
// the drawn line.
struct PlotData {
    std::string x_name = "interval";
    std::vector<double> x;
    std::vector<std::string> series;
    std::vector<std::vector<std::optional<double>>> y;  // y[series][point]

    void add_series(std::string name, std::vector<std::optional<double>> values);
};

[[nodiscard]] std::string to_csv(const PlotData& data);
// FormatError on ragged rows or unparsable numbers.
[[nodiscard]] PlotData parse_plot_csv(std::string_view csv);

struct PlotStyle {
    std::string title;
    std::string y_label;
    std::optional<std::pair<double, double>> shade;  // x range drawn as a band
    bool half_hour_axis = true;  // label x as HH:MM of half-hour slots
};

// Standalone SVG line chart. Pure function of its inputs.
[[nodiscard]] std::string render_svg(const PlotData& data, const PlotStyle& style);

// "%.3f" with "-0.000" normalised to "0.000".
[[nodiscard]] std::string fixed3(double v);

}  // namespace epf::bench
