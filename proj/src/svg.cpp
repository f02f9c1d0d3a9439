#include "flexclust/svg.hpp"

#include "flexclust/error.hpp"
#include "flexclust/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

namespace flexclust {

namespace {

constexpr double panel_w = 420.0;
constexpr double panel_h = 340.0;
constexpr double margin_l = 70.0;
constexpr double margin_r = 20.0;
constexpr double margin_t = 40.0;
constexpr double margin_b = 50.0;
constexpr double legend_h = 30.0;

constexpr std::array<const char*, 8> fallback_palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                      "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

Range padded(std::span<const double> values)
{
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn;
    double hi = *mx;
    if (hi <= lo) {
        const double half = std::max(1.0, std::abs(lo) * 0.05);
        return {lo - half, hi + half};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

std::vector<double> ticks(Range r)
{
    const double span = r.hi - r.lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    }
    std::vector<double> out;
    for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * step; t += step) {
        out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    }
    return out;
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string axis_title(const std::string& attr)
{
    if (attr == "mean_evening_power_w") {
        return "mean evening power (W)";
    }
    if (attr == "sd_time_of_max_min") {
        return "sd of time of max (min)";
    }
    return "sd of time of min (min)";
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

const char* label_colour(ClusterLabel label)
{
    switch (label) {
    case ClusterLabel::high_usage: return "green";
    case ClusterLabel::high_variability: return "red";
    case ClusterLabel::stable_low: return "black";
    case ClusterLabel::mid: return "blue";
    }
    return "gray";
}

std::string render_scatter_svg(const ClusterArtifact& clusters, std::span<const FeatureVector> features)
{
    const auto& model = clusters.model;
    const std::size_t dims = attribute_count(clusters.mode);

    std::map<std::string, const FeatureVector*> by_id;
    for (const auto& f : features) {
        if (!by_id.emplace(f.household_id, &f).second) {
            throw ValidationError("plot: duplicate household " + f.household_id + " in features");
        }
        if ((clusters.mode == FeatureMode::three_attr) != f.sd_time_of_min.has_value()) {
            throw ValidationError("plot: features are not in " + std::string(to_string(clusters.mode))
                                  + " mode like the cluster model");
        }
    }
    if (by_id.size() != model.household_ids.size()) {
        throw ValidationError("plot: features list " + std::to_string(by_id.size())
                              + " households but the cluster model has " + std::to_string(model.household_ids.size()));
    }
    for (const auto& id : model.household_ids) {
        if (!by_id.contains(id)) {
            throw ValidationError("plot: household " + id + " is missing from the features");
        }
    }

    // Coordinates in original units, attribute order as in attribute_names().
    std::vector<std::vector<double>> coords;
    for (std::size_t i = 0; i < model.household_ids.size(); ++i) {
        const auto* f = by_id.at(model.household_ids[i]);
        std::vector<double> c{f->mean_evening_power, f->sd_time_of_max};
        if (dims == 3) {
            c.push_back(*f->sd_time_of_min);
        }
        coords.push_back(std::move(c));
    }
    std::vector<std::vector<double>> centres;
    for (const auto& c : model.centroids) {
        centres.push_back(clusters.params.to_original(c));
    }

    auto colour = [&](std::size_t cluster) -> std::string {
        if (!model.labels.empty()) {
            return label_colour(model.labels[cluster]);
        }
        return fallback_palette[cluster % fallback_palette.size()];
    };
    auto label_text = [&](std::size_t cluster) -> std::string {
        return model.labels.empty() ? "cluster " + std::to_string(cluster) : to_string(model.labels[cluster]);
    };

    // (x attribute, y attribute) per panel.
    std::vector<std::pair<std::size_t, std::size_t>> panels{{1, 0}};
    if (dims == 3) {
        panels = {{1, 0}, {2, 0}, {1, 2}};
    }
    const auto names = attribute_names(clusters.mode);

    const double cell_w = margin_l + panel_w + margin_r;
    const double cell_h = margin_t + panel_h + margin_b;
    const double width = cell_w * static_cast<double>(panels.size());
    const double height = cell_h + legend_h;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"white\"/>\n";

    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto [xa, ya] = panels[p];
        std::vector<double> xs, ys;
        for (const auto& c : coords) {
            xs.push_back(c[xa]);
            ys.push_back(c[ya]);
        }
        for (const auto& c : centres) {
            xs.push_back(c[xa]);
            ys.push_back(c[ya]);
        }
        const Range xr = padded(xs);
        const Range yr = padded(ys);
        const double ox = cell_w * static_cast<double>(p) + margin_l;
        const double oy = margin_t;
        auto sx = [&](double v) { return ox + (v - xr.lo) / (xr.hi - xr.lo) * panel_w; };
        auto sy = [&](double v) { return oy + panel_h - (v - yr.lo) / (yr.hi - yr.lo) * panel_h; };

        svg << "<g class=\"panel\" data-x=\"" << names[xa] << "\" data-y=\"" << names[ya] << "\">\n";
        svg << "<rect x=\"" << num(ox) << "\" y=\"" << num(oy) << "\" width=\"" << num(panel_w) << "\" height=\""
            << num(panel_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (double t : ticks(xr)) {
            svg << "<line x1=\"" << num(sx(t)) << "\" y1=\"" << num(oy + panel_h) << "\" x2=\"" << num(sx(t))
                << "\" y2=\"" << num(oy + panel_h + 5) << "\" stroke=\"#444\"/>"
                << "<text x=\"" << num(sx(t)) << "\" y=\"" << num(oy + panel_h + 18)
                << "\" text-anchor=\"middle\">" << format_number(t) << "</text>\n";
        }
        for (double t : ticks(yr)) {
            svg << "<line x1=\"" << num(ox - 5) << "\" y1=\"" << num(sy(t)) << "\" x2=\"" << num(ox) << "\" y2=\""
                << num(sy(t)) << "\" stroke=\"#444\"/>"
                << "<text x=\"" << num(ox - 8) << "\" y=\"" << num(sy(t) + 4) << "\" text-anchor=\"end\">"
                << format_number(t) << "</text>\n";
        }
        svg << "<text x=\"" << num(ox + panel_w / 2) << "\" y=\"" << num(oy + panel_h + 38)
            << "\" text-anchor=\"middle\">" << axis_title(names[xa]) << "</text>\n";
        svg << "<text x=\"" << num(ox - 55) << "\" y=\"" << num(oy + panel_h / 2) << "\" text-anchor=\"middle\""
            << " transform=\"rotate(-90 " << num(ox - 55) << ' ' << num(oy + panel_h / 2) << ")\">"
            << axis_title(names[ya]) << "</text>\n";

        for (std::size_t i = 0; i < coords.size(); ++i) {
            const std::size_t c = model.assignments[i];
            svg << "<circle class=\"point\" data-household=\"" << escape(model.household_ids[i])
                << "\" data-cluster=\"" << c << "\" cx=\"" << num(sx(coords[i][xa])) << "\" cy=\""
                << num(sy(coords[i][ya])) << "\" r=\"3\" fill=\"" << colour(c) << "\" fill-opacity=\"0.75\"/>\n";
        }
        for (std::size_t c = 0; c < centres.size(); ++c) {
            const double cx = sx(centres[c][xa]);
            const double cy = sy(centres[c][ya]);
            svg << "<path class=\"centroid\" data-cluster=\"" << c << "\" d=\"M" << num(cx - 7) << ' ' << num(cy - 7)
                << " L" << num(cx + 7) << ' ' << num(cy + 7) << " M" << num(cx - 7) << ' ' << num(cy + 7) << " L"
                << num(cx + 7) << ' ' << num(cy - 7) << "\" stroke=\"" << colour(c)
                << "\" stroke-width=\"3\" fill=\"none\"/>\n";
        }
        svg << "</g>\n";
    }

    svg << "<g class=\"legend\">\n";
    for (std::size_t c = 0; c < model.k; ++c) {
        const double x = margin_l + 150.0 * static_cast<double>(c);
        const double y = cell_h + legend_h / 2;
        svg << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"5\" fill=\"" << colour(c) << "\"/>"
            << "<text x=\"" << num(x + 10) << "\" y=\"" << num(y + 4) << "\">" << label_text(c) << "</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

} // namespace flexclust
