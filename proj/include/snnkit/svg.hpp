// Small standalone SVG line-plot writer for the report outputs.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "snnkit/common.hpp"

namespace snnkit {

struct PlotSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<std::pair<double, double>> points;
  bool staircase = false;  // draw horizontal runs between samples
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  bool log2_x = false;
};

namespace detail {

inline std::string svg_num(double v) {
  const double r = std::round(v * 100.0) / 100.0;
  return num_str(r + 0.0);  // +0.0 folds -0 into 0
}

}  // namespace detail

inline std::string render_line_plot(const LinePlot& plot) {
  const double width = 640, height = 420;
  const double left = 64, right = 24, top = 36, bottom = 52;
  const double pw = width - left - right, ph = height - top - bottom;

  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& s : plot.series)
    for (auto [x, y] : s.points) {
      const double px = plot.log2_x ? std::log2(std::max(1e-12, x)) : x;
      x_min = std::min(x_min, px);
      x_max = std::max(x_max, px);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  if (x_min > x_max) { x_min = 0; x_max = 1; }
  if (y_min > y_max) { y_min = 0; y_max = 1; }
  if (x_max - x_min < 1e-12) { x_min -= 0.5; x_max += 0.5; }
  if (y_max - y_min < 1e-12) { y_min -= 0.5; y_max += 0.5; }
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto sx = [&](double x) {
    const double px = plot.log2_x ? std::log2(std::max(1e-12, x)) : x;
    return left + (px - x_min) / (x_max - x_min) * pw;
  };
  auto sy = [&](double y) { return top + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_num(width) +
                    "\" height=\"" + detail::svg_num(height) + "\" viewBox=\"0 0 " +
                    detail::svg_num(width) + " " + detail::svg_num(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + detail::svg_num(width / 2) + "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">" + plot.title + "</text>\n";

  // axes
  svg += "<line x1=\"" + detail::svg_num(left) + "\" y1=\"" + detail::svg_num(top + ph) +
         "\" x2=\"" + detail::svg_num(left + pw) + "\" y2=\"" + detail::svg_num(top + ph) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + detail::svg_num(left) + "\" y1=\"" + detail::svg_num(top) + "\" x2=\"" +
         detail::svg_num(left) + "\" y2=\"" + detail::svg_num(top + ph) + "\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double fx = x_min + (x_max - x_min) * i / 5.0;
    const double gx = left + pw * i / 5.0;
    const double value = plot.log2_x ? std::exp2(fx) : fx;
    svg += "<line x1=\"" + detail::svg_num(gx) + "\" y1=\"" + detail::svg_num(top + ph) +
           "\" x2=\"" + detail::svg_num(gx) + "\" y2=\"" + detail::svg_num(top + ph + 4) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_num(gx) + "\" y=\"" + detail::svg_num(top + ph + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
           detail::svg_num(value) + "</text>\n";
    const double fy = y_min + (y_max - y_min) * i / 5.0;
    const double gy = top + ph * (1.0 - i / 5.0);
    svg += "<line x1=\"" + detail::svg_num(left - 4) + "\" y1=\"" + detail::svg_num(gy) +
           "\" x2=\"" + detail::svg_num(left) + "\" y2=\"" + detail::svg_num(gy) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_num(left - 8) + "\" y=\"" + detail::svg_num(gy + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           detail::svg_num(fy) + "</text>\n";
  }
  svg += "<text x=\"" + detail::svg_num(left + pw / 2) + "\" y=\"" +
         detail::svg_num(height - 10) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">" + plot.x_label + "</text>\n";
  svg += "<text x=\"14\" y=\"" + detail::svg_num(top + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 " +
         detail::svg_num(top + ph / 2) + ")\">" + plot.y_label + "</text>\n";

  double legend_y = top + 8;
  for (const auto& s : plot.series) {
    if (s.points.empty()) continue;
    std::string pts;
    if (s.staircase) {
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        if (i)
          pts += detail::svg_num(sx(s.points[i].first)) + "," +
                 detail::svg_num(sy(s.points[i - 1].second)) + " ";
        pts += detail::svg_num(sx(s.points[i].first)) + "," +
               detail::svg_num(sy(s.points[i].second)) + " ";
      }
    } else {
      for (const auto& [x, y] : s.points)
        pts += detail::svg_num(sx(x)) + "," + detail::svg_num(sy(y)) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" +
           pts + "\"/>\n";
    svg += "<line x1=\"" + detail::svg_num(left + pw - 130) + "\" y1=\"" + detail::svg_num(legend_y) +
           "\" x2=\"" + detail::svg_num(left + pw - 110) + "\" y2=\"" + detail::svg_num(legend_y) +
           "\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"/>\n";
    svg += "<text x=\"" + detail::svg_num(left + pw - 104) + "\" y=\"" +
           detail::svg_num(legend_y + 3) + "\" font-family=\"sans-serif\" font-size=\"10\">" +
           s.label + "</text>\n";
    legend_y += 14;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace snnkit
