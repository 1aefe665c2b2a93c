#include "celebi/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "celebi/errors.hpp"

namespace celebi {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 610, kTop = 50, kBottom = 370;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

void write_svg_lineplot(const std::string& path, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel, const std::vector<PlotSeries>& series) {
    check(!series.empty(), "write_svg_lineplot: no series");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        check(s.x.size() == s.y.size() && !s.x.empty(), "write_svg_lineplot: malformed series");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double err = s.yerr.size() == s.y.size() ? s.yerr[i] : 0.0;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i] - err);
            ymax = std::max(ymax, s.y[i] + err);
        }
    }
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double ypad = 0.06 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * (kRight - kLeft); };
    auto sy = [&](double y) { return kBottom - (y - ymin) / (ymax - ymin) * (kBottom - kTop); };

    std::ofstream out(path);
    check(out.good(), "write_svg_lineplot: cannot open '" + path + "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << (kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" "
        << "font-family=\"sans-serif\">" << title << "</text>\n";

    // axes and ticks
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight << "\" y2=\"" << kBottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kBottom
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 5.0;
        const double fy = ymin + (ymax - ymin) * i / 5.0;
        out << "<line x1=\"" << sx(fx) << "\" y1=\"" << kBottom << "\" x2=\"" << sx(fx) << "\" y2=\"" << (kBottom + 5)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << sx(fx) << "\" y=\"" << (kBottom + 20)
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << num(fx) << "</text>\n";
        out << "<line x1=\"" << (kLeft - 5) << "\" y1=\"" << sy(fy) << "\" x2=\"" << kLeft << "\" y2=\"" << sy(fy)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << (kLeft - 9) << "\" y=\"" << (sy(fy) + 4)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << num(fy) << "</text>\n";
    }
    out << "<text x=\"" << ((kLeft + kRight) / 2) << "\" y=\"" << (kHeight - 12)
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << xlabel << "</text>\n";
    out << "<text x=\"18\" y=\"" << ((kTop + kBottom) / 2)
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 18 "
        << ((kTop + kBottom) / 2) << ")\">" << ylabel << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kColors[k % (sizeof kColors / sizeof kColors[0])];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) out << num(sx(s.x[i])) << "," << num(sy(s.y[i])) << " ";
        out << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out << "<circle cx=\"" << num(sx(s.x[i])) << "\" cy=\"" << num(sy(s.y[i])) << "\" r=\"2.5\" fill=\""
                << color << "\"/>\n";
            if (s.yerr.size() == s.y.size() && s.yerr[i] > 0.0) {
                out << "<line x1=\"" << num(sx(s.x[i])) << "\" y1=\"" << num(sy(s.y[i] - s.yerr[i])) << "\" x2=\""
                    << num(sx(s.x[i])) << "\" y2=\"" << num(sy(s.y[i] + s.yerr[i])) << "\" stroke=\"" << color
                    << "\" stroke-width=\"1.2\"/>\n";
            }
        }
        out << "<text x=\"" << (kRight - 150) << "\" y=\"" << (kTop + 16 + 16 * static_cast<double>(k))
            << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << color << "\">" << s.label << "</text>\n";
    }
    out << "</svg>\n";
    check(out.good(), "write_svg_lineplot: write failed");
}

}  // namespace celebi
