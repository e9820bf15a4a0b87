#pragma once

// Minimal static SVG line plot for the plot-data series.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace bslab {

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<std::pair<double, double>> points;
  std::optional<double> reference;  // horizontal guide line
};

inline void write_svg(std::ostream& out, const LinePlot& plot) {
  constexpr double width = 640, height = 400, margin = 60;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  auto fx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
  for (const auto& [x, y] : plot.points) {
    if (plot.log_x && x <= 0.0) continue;
    x0 = std::min(x0, fx(x));
    x1 = std::max(x1, fx(x));
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  if (plot.reference) {
    y0 = std::min(y0, *plot.reference);
    y1 = std::max(y1, *plot.reference);
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return margin + (fx(x) - x0) / (x1 - x0) * (width - 2 * margin); };
  auto py = [&](double y) { return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin); };

  char buf[128];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << plot.title << "</text>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 16 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << plot.x_label << (plot.log_x ? " (log10)" : "") << "</text>\n";
  out << "<text x=\"16\" y=\"" << height / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 " << height / 2
      << ")\" text-anchor=\"middle\">" << plot.y_label << "</text>\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << width - 2 * margin << "\" height=\""
      << height - 2 * margin << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = y0 + (y1 - y0) * t / 4.0;
    std::snprintf(buf, sizeof buf, "%.4g", y);
    out << "<text x=\"" << margin - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << buf
        << "</text>\n";
    const double x = x0 + (x1 - x0) * t / 4.0;
    std::snprintf(buf, sizeof buf, "%.4g", plot.log_x ? std::pow(10.0, x) : x);
    out << "<text x=\"" << margin + (x - x0) / (x1 - x0) * (width - 2 * margin) << "\" y=\"" << height - margin + 14
        << "\" text-anchor=\"middle\" font-size=\"10\">" << buf << "</text>\n";
  }
  if (plot.reference) {
    out << "<line x1=\"" << margin << "\" x2=\"" << width - margin << "\" y1=\"" << py(*plot.reference) << "\" y2=\""
        << py(*plot.reference) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.2\" points=\"";
  for (const auto& [x, y] : plot.points) {
    if (plot.log_x && x <= 0.0) continue;
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x), py(y));
    out << buf;
  }
  out << "\"/>\n</svg>\n";
}

}  // namespace bslab
