// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal self-contained SVG output: a power-time heatmap and line traces.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace qdd::svg {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

// Piecewise-linear approximation of a perceptually ordered colormap.
inline std::string colormap(double x) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84},
                                                              {59, 82, 139},
                                                              {33, 145, 140},
                                                              {94, 201, 98},
                                                              {253, 231, 37}}};
  x = std::clamp(x, 0.0, 1.0) * static_cast<double>(stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), stops.size() - 2);
  const double f = x - static_cast<double>(i);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

inline std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
         "width=\"" + num(w) + "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " +
         num(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"" + anchor + "\">" +
         escape(s) + "</text>\n";
}

}  // namespace detail

/// Rows are drawn bottom (first) to top (last); cell colour scales with the
/// value relative to the global maximum.
inline std::string heatmap(const std::vector<double>& x_edges, const std::vector<double>& rows_y,
                           const std::vector<std::vector<double>>& values,
                           const std::string& x_label, const std::string& y_label,
                           const std::string& title) {
  using detail::num;
  const double w = 760, h = 480, left = 70, right = 20, top = 40, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double vmax = 0.0;
  for (const auto& r : values)
    for (double v : r) vmax = std::max(vmax, v);
  const double x0 = x_edges.front(), x1 = x_edges.back();
  const double row_h = ph / static_cast<double>(std::max<std::size_t>(values.size(), 1));
  std::string s = detail::header(w, h);
  s += detail::text(w / 2, 22, title);
  for (std::size_t r = 0; r < values.size(); ++r) {
    const double y = top + ph - row_h * static_cast<double>(r + 1);
    for (std::size_t b = 0; b + 1 < x_edges.size() && b < values[r].size(); ++b) {
      const double xa = left + pw * (x_edges[b] - x0) / (x1 - x0);
      const double xb = left + pw * (x_edges[b + 1] - x0) / (x1 - x0);
      const double frac = vmax > 0.0 ? values[r][b] / vmax : 0.0;
      s += "<rect x=\"" + num(xa) + "\" y=\"" + num(y) + "\" width=\"" + num(xb - xa + 0.05) +
           "\" height=\"" + num(row_h + 0.05) + "\" fill=\"" + detail::colormap(frac) + "\"/>\n";
    }
  }
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  s += detail::text(left, h - bottom + 16, num(x0));
  s += detail::text(left + pw, h - bottom + 16, num(x1));
  s += detail::text(left + pw / 2, h - 12, x_label);
  if (!rows_y.empty()) {
    s += detail::text(left - 6, top + ph, num(rows_y.front()), "end");
    s += detail::text(left - 6, top + 12, num(rows_y.back()), "end");
  }
  s += "<text transform=\"translate(18," + num(top + ph / 2) +
       ") rotate(-90)\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" +
       detail::escape(y_label) + "</text>\n";
  s += "</svg>\n";
  return s;
}

struct Series {
  std::string label;
  std::vector<double> y;
};

inline std::string line_plot(const std::vector<double>& x, const std::vector<Series>& series,
                             const std::string& x_label, const std::string& y_label,
                             const std::string& title) {
  using detail::num;
  static constexpr std::array<const char*, 6> colors{"#1f77b4", "#d62728", "#2ca02c",
                                                     "#ff7f0e", "#9467bd", "#8c564b"};
  const double w = 760, h = 480, left = 70, right = 160, top = 40, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double ymax = 0.0;
  for (const auto& se : series)
    for (double v : se.y) ymax = std::max(ymax, v);
  if (ymax <= 0.0) ymax = 1.0;
  const double x0 = x.empty() ? 0.0 : x.front();
  const double x1 = x.empty() ? 1.0 : x.back();
  std::string s = detail::header(w, h);
  s += detail::text(left + pw / 2, 22, title);
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    std::string pts;
    for (std::size_t i = 0; i < x.size() && i < series[k].y.size(); ++i) {
      const double px = left + pw * (x[i] - x0) / (x1 - x0);
      const double py = top + ph - ph * series[k].y[i] / ymax;
      pts += num(px) + "," + num(py) + " ";
    }
    const char* color = colors[k % colors.size()];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
         "\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(k);
    s += "<line x1=\"" + num(left + pw + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
         num(left + pw + 30) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\"/>\n";
    s += detail::text(left + pw + 34, ly, series[k].label, "start");
  }
  s += detail::text(left, h - bottom + 16, num(x0));
  s += detail::text(left + pw, h - bottom + 16, num(x1));
  s += detail::text(left + pw / 2, h - 12, x_label);
  s += detail::text(left - 6, top + 12, num(ymax), "end");
  s += "<text transform=\"translate(18," + num(top + ph / 2) +
       ") rotate(-90)\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" +
       detail::escape(y_label) + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace qdd::svg
