#pragma once

#include <string>
#include <utility>
#include <vector>

#include "east/masker.hpp"
#include "east/video.hpp"

namespace east::cli {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

// Minimal self-contained vector chart: axes, ticks, legend, one polyline
// per series. y range defaults to [0, 1] (accuracy curves).
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series, double y_min = 0.0,
                      double y_max = 1.0);

// Per-timestep retention heatmap: one panel per tubelet step, each cell the
// mean intensity of its patch, kept cells highlighted.
void write_mask_heatmap(const std::string& path, const video::Clip& clip,
                        const masker::MaskConfig& cfg,
                        const masker::MaskSelection& sel,
                        const masker::RankGrid& ranks);

}  // namespace east::cli
