#include "epf/bench/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "epf/error.hpp"

namespace epf::bench {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

double parse_number(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw FormatError("");
        return v;
    } catch (const std::exception&) {
        throw FormatError("plot data: bad number '" + s + "'");
    }
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void PlotData::add_series(std::string name, std::vector<std::optional<double>> values) {
    if (values.size() != x.size()) throw ShapeError("plot series length differs from the x axis");
    series.push_back(std::move(name));
    y.push_back(std::move(values));
}

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    if (s == "-0.000") s = "0.000";
    return s;
}

std::string to_csv(const PlotData& d) {
    std::string out = d.x_name;
    for (const auto& s : d.series) out += "," + s;
    out += '\n';
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        out += num(d.x[i]);
        for (const auto& col : d.y) {
            out += ',';
            if (col[i]) out += num(*col[i]);
        }
        out += '\n';
    }
    return out;
}

PlotData parse_plot_csv(std::string_view csv) {
    PlotData d;
    std::istringstream in{std::string(csv)};
    std::string line;
    if (!std::getline(in, line)) throw FormatError("plot data: empty file");
    auto header = split_line(line);
    d.x_name = header.front();
    d.series.assign(header.begin() + 1, header.end());
    d.y.resize(d.series.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) throw FormatError("plot data: ragged row");
        d.x.push_back(parse_number(cells[0]));
        for (std::size_t s = 0; s < d.series.size(); ++s) {
            const auto& c = cells[s + 1];
            d.y[s].push_back(c.empty() ? std::nullopt : std::optional<double>(parse_number(c)));
        }
    }
    return d;
}

std::string render_svg(const PlotData& d, const PlotStyle& style) {
    constexpr double W = 760, H = 380, left = 70, right = 170, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (!d.x.empty()) {
        xmin = *std::min_element(d.x.begin(), d.x.end());
        xmax = *std::max_element(d.x.begin(), d.x.end());
    }
    bool any = false;
    for (const auto& col : d.y)
        for (const auto& v : col)
            if (v) {
                if (!any) ymin = ymax = *v;
                ymin = std::min(ymin, *v);
                ymax = std::max(ymax, *v);
                any = true;
            }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) {
        ymin -= 1;
        ymax += 1;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto sx = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double v) { return top + (ymax - v) / (ymax - ymin) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << px(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(style.title) << "</text>\n";
    if (style.shade) {
        const double a = sx(std::max(style.shade->first, xmin)), b = sx(std::min(style.shade->second, xmax));
        o << "<rect x=\"" << px(a) << "\" y=\"" << px(top) << "\" width=\"" << px(b - a) << "\" height=\""
          << px(ph) << "\" fill=\"#eeeeee\"/>\n";
    }
    o << "<rect x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(pw) << "\" height=\"" << px(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int t = 0; t <= 5; ++t) {
        const double v = ymin + (ymax - ymin) * t / 5.0;
        o << "<line x1=\"" << px(left - 4) << "\" x2=\"" << px(left) << "\" y1=\"" << px(sy(v)) << "\" y2=\""
          << px(sy(v)) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << px(left - 6) << "\" y=\"" << px(sy(v) + 4) << "\" text-anchor=\"end\">" << num(std::round(v * 100) / 100)
          << "</text>\n";
    }
    const double step = style.half_hour_axis ? 6.0 : std::max(1.0, std::ceil((xmax - xmin) / 8.0));
    for (double v = std::ceil(xmin / step) * step; v <= xmax + 1e-9; v += step) {
        std::string label = num(v);
        if (style.half_hour_axis) {
            char buf[32];
            const int k = static_cast<int>(std::lround(v));
            std::snprintf(buf, sizeof buf, "%02d:%02d", k / 2, (k % 2) * 30);
            label = buf;
        }
        o << "<line x1=\"" << px(sx(v)) << "\" x2=\"" << px(sx(v)) << "\" y1=\"" << px(top + ph) << "\" y2=\""
          << px(top + ph + 4) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << px(sx(v)) << "\" y=\"" << px(top + ph + 16) << "\" text-anchor=\"middle\">" << label
          << "</text>\n";
    }
    o << "<text x=\"" << px(left + pw / 2) << "\" y=\"" << px(H - 10) << "\" text-anchor=\"middle\">"
      << (style.half_hour_axis ? "time of day" : escape(d.x_name)) << "</text>\n";
    o << "<text transform=\"translate(16," << px(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(style.y_label) << "</text>\n";

    for (std::size_t s = 0; s < d.series.size(); ++s) {
        const char* colour = kPalette[s % std::size(kPalette)];
        std::string points;
        auto flush = [&] {
            if (!points.empty())
                o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"" << points
                  << "\"/>\n";
            points.clear();
        };
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            if (!d.y[s][i]) {
                flush();
                continue;
            }
            points += px(sx(d.x[i])) + "," + px(sy(*d.y[s][i])) + " ";
        }
        flush();
        const double ly = top + 14 * static_cast<double>(s) + 8;
        o << "<line x1=\"" << px(left + pw + 12) << "\" x2=\"" << px(left + pw + 32) << "\" y1=\"" << px(ly)
          << "\" y2=\"" << px(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>";
        o << "<text x=\"" << px(left + pw + 36) << "\" y=\"" << px(ly + 4) << "\">" << escape(d.series[s])
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace epf::bench
