#pragma once

#include <string>
#include <vector>

namespace celebi {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> yerr;  // optional, same length as y
};

// Minimal static line plot with optional error bars; output is a standalone
// SVG file.
void write_svg_lineplot(const std::string& path, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel, const std::vector<PlotSeries>& series);

}  // namespace celebi
