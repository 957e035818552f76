#include "east/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace east::cli {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series, double y_min, double y_max) {
    if (series.empty()) throw ContractError("chart needs at least one series");
    double x_min = 1e300, x_max = -1e300;
    for (const Series& s : series)
        for (const auto& [x, y] : s.points) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
        }
    if (!(x_min < x_max)) {
        x_min -= 0.5;
        x_max += 0.5;
    }

    const double w = 640, h = 420;
    const double ml = 64, mr = 24, mt = 40, mb = 56;
    const double pw = w - ml - mr, ph = h - mt - mb;
    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    char buf[256];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
        << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">"
        << escape_xml(title) << "</text>\n";

    // frame + grid lines with tick labels
    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double fy = y_min + (y_max - y_min) * i / ticks;
        const double fx = x_min + (x_max - x_min) * i / ticks;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"#dddddd\"/>\n",
                      ml, py(fy), ml + pw, py(fy));
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" "
                      "font-family=\"sans-serif\" font-size=\"11\">%.2f</text>\n",
                      ml - 6, py(fy) + 4, fy);
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" "
                      "font-family=\"sans-serif\" font-size=\"11\">%.2g</text>\n",
                      px(fx), mt + ph + 16, fx);
        out << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                  "fill=\"none\" stroke=\"#444444\"/>\n",
                  ml, mt, pw, ph);
    out << buf;
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape_xml(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 16 "
        << mt + ph / 2 << ")\">" << escape_xml(y_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[si].points) {
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(x), py(y));
            out << buf;
        }
        out << "\"/>\n";
        for (const auto& [x, y] : series[si].points) {
            std::snprintf(buf, sizeof buf,
                          "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"2.5\" fill=\"%s\"/>\n",
                          px(x), py(y), color);
            out << buf;
        }
        // legend entry
        const double ly = mt + 14 + 16.0 * double(si);
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"%s\" stroke-width=\"3\"/>\n",
                      ml + 10, ly, ml + 34, ly, color);
        out << buf;
        out << "<text x=\"" << ml + 40 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\">"
            << escape_xml(series[si].label) << "</text>\n";
    }
    out << "</svg>\n";
}

void write_mask_heatmap(const std::string& path, const video::Clip& clip,
                        const masker::MaskConfig& cfg,
                        const masker::MaskSelection& sel,
                        const masker::RankGrid& ranks) {
    const masker::TubeletGrid grid = sel.grid;
    const double cell = 22.0;
    const double gap = 14.0;
    const double label_h = 18.0;
    const double panel_w = grid.cols * cell;
    const double panel_h = grid.rows * cell + label_h;
    const double w = gap + (panel_w + gap) * grid.t;
    const double h = panel_h + 2 * gap;

    double max_rank = 1.0;
    for (double r : ranks.r) max_rank = std::max(max_rank, r);

    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    char buf[256];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
        << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int t = 0; t < grid.t; ++t) {
        const double ox = gap + t * (panel_w + gap);
        const double oy = gap + label_h;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                      "font-size=\"12\">t=%d</text>\n",
                      ox, gap + 12, t);
        out << buf;
        for (int i = 0; i < grid.rows; ++i) {
            for (int j = 0; j < grid.cols; ++j) {
                // mean patch intensity over the tubelet as the base shade
                const auto px = masker::tubelet_pixels(clip, cfg, t, i, j);
                long sum = 0;
                for (auto v : px) sum += v;
                const int shade = int(sum / (px.empty() ? 1 : long(px.size())));
                std::snprintf(buf, sizeof buf,
                              "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" "
                              "height=\"%.1f\" fill=\"rgb(%d,%d,%d)\"/>\n",
                              ox + j * cell, oy + i * cell, cell, cell, shade, shade,
                              shade);
                out << buf;
                if (sel.at(t, i, j)) {
                    const double alpha = 0.25 + 0.5 * ranks.at(t, i, j) / max_rank;
                    std::snprintf(buf, sizeof buf,
                                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" "
                                  "height=\"%.1f\" fill=\"#2ca02c\" "
                                  "fill-opacity=\"%.2f\" stroke=\"#2ca02c\"/>\n",
                                  ox + j * cell, oy + i * cell, cell, cell, alpha);
                    out << buf;
                } else {
                    std::snprintf(buf, sizeof buf,
                                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" "
                                  "height=\"%.1f\" fill=\"#d62728\" "
                                  "fill-opacity=\"0.15\"/>\n",
                                  ox + j * cell, oy + i * cell, cell, cell);
                    out << buf;
                }
            }
        }
    }
    out << "</svg>\n";
}

}  // namespace east::cli
