#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <string>
#include <vector>

#include "pptflow/error.hpp"
#include "pptflow/io.hpp"

namespace pptflow {

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
  bool dashed = false;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace detail

/// Line chart with one polyline per series, min/max tick labels on both axes and a legend.
/// Points keep their data coordinates exactly up to the linear pixel mapping.
inline std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<PlotSeries>& series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  std::size_t points = 0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) fail(ErrorKind::kDimension, "plot series '" + s.name + "' has mismatched x/y lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) fail(ErrorKind::kNumeric, "plot series '" + s.name + "' holds non-finite values");
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
    points += s.x.size();
  }
  if (points == 0) fail(ErrorKind::kDomain, "nothing to plot: all series are empty");
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;

  constexpr double W = 800, H = 400, left = 70, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" viewBox=\"0 0 800 400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"800\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"" + format_number(left) + "\" y=\"24\" font-size=\"14\">" + detail::xml_escape(title) + "</text>\n";
  svg += "<rect x=\"70\" y=\"40\" width=\"" + format_number(pw) + "\" height=\"" + format_number(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  auto text = [&](double x, double y, const std::string& s, const char* anchor) {
    svg += "<text x=\"" + format_number(x) + "\" y=\"" + format_number(y) + "\" text-anchor=\"" + anchor + "\">" + detail::xml_escape(s) + "</text>\n";
  };
  text(left, H - bottom + 16, detail::short_number(x0), "start");
  text(left + pw, H - bottom + 16, detail::short_number(x1), "end");
  text(left - 6, top + 10, detail::short_number(y1), "end");
  text(left - 6, top + ph, detail::short_number(y0), "end");
  text(left + pw / 2, H - 12, x_label, "middle");
  svg += "<text x=\"16\" y=\"" + format_number(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         format_number(top + ph / 2) + ")\">" + detail::xml_escape(y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::string color = palette[k % std::size(palette)];
    svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"" + (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) svg += (i ? " " : "") + format_number(px(s.x[i])) + "," + format_number(py(s.y[i]));
    svg += "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(k);
    svg += "<line x1=\"" + format_number(W - right + 10) + "\" y1=\"" + format_number(ly - 4) + "\" x2=\"" + format_number(W - right + 30) +
           "\" y2=\"" + format_number(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"" + (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    text(W - right + 36, ly, s.name, "start");
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace pptflow
