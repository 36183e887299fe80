// Copyright 2026 The mftg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Static SVG figures: line charts (optionally log-scale) and 2-simplex
// trajectories.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mftg/core.hpp"

namespace mftg::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<Series> series;
};

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"};
  return colors[i % 8];
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string render(const Chart& chart) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  auto ty = [&](double y) { return chart.log_y ? std::log10(y) : y; };
  for (const auto& s : chart.series) {
    if (s.x.size() != s.y.size()) throw Error("series '" + s.label + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (chart.log_y && s.y[i] <= 0.0) continue;
      x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(chart.title) << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
     << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double yv = chart.log_y ? std::pow(10.0, fy) : fy;
    os << "<text x=\"" << px(fx) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fx
       << "</text>\n"
       << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv
       << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << escape(chart.x_label) << "</text>\n"
     << "<text transform=\"translate(16," << (T + H - B) / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto& ser = chart.series[s];
    os << "<polyline fill=\"none\" stroke=\"" << palette(s) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!std::isfinite(ser.y[i]) || (chart.log_y && ser.y[i] <= 0.0)) continue;
      os << px(ser.x[i]) << ',' << py(ser.y[i]) << ' ';
    }
    os << "\"/>\n<text x=\"" << W - R + 10 << "\" y=\"" << T + 14 + 16 * s << "\" fill=\""
       << palette(s) << "\">" << escape(ser.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Points on the 2-simplex drawn in an equilateral triangle with vertices
// labelled by `corners`; one polyline per trajectory.
struct SimplexPath {
  std::string label;
  std::size_t group = 0;  // colour index
  std::vector<std::array<double, 3>> points;
};

inline std::string render_simplex(const std::string& title, const std::array<std::string, 3>& corners,
                                  const std::vector<SimplexPath>& paths) {
  constexpr double W = 480, H = 440, S = 380, X0 = 50, Y0 = 400;
  const double h = S * std::sqrt(3.0) / 2.0;
  auto to_xy = [&](const std::array<double, 3>& p) {
    // corner 0 bottom-left, corner 1 bottom-right, corner 2 top.
    return std::pair{X0 + S * (p[1] + 0.5 * p[2]), Y0 - h * p[2]};
  };
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"13\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n"
     << "<polygon fill=\"none\" stroke=\"black\" points=\"" << X0 << ',' << Y0 << ' ' << X0 + S << ','
     << Y0 << ' ' << X0 + S / 2 << ',' << Y0 - h << "\"/>\n"
     << "<text x=\"" << X0 - 8 << "\" y=\"" << Y0 + 16 << "\">" << escape(corners[0]) << "</text>\n"
     << "<text x=\"" << X0 + S - 8 << "\" y=\"" << Y0 + 16 << "\">" << escape(corners[1]) << "</text>\n"
     << "<text x=\"" << X0 + S / 2 - 8 << "\" y=\"" << Y0 - h - 6 << "\">" << escape(corners[2])
     << "</text>\n";
  const auto centre = to_xy({1.0 / 3, 1.0 / 3, 1.0 / 3});
  os << "<circle cx=\"" << centre.first << "\" cy=\"" << centre.second
     << "\" r=\"4\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& p : paths) {
    os << "<polyline fill=\"none\" stroke-opacity=\"0.5\" stroke=\"" << palette(p.group)
       << "\" points=\"";
    for (const auto& q : p.points) {
      const auto [x, y] = to_xy(q);
      os << x << ',' << y << ' ';
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Minimal CSV reader for the files this project writes: a header row and
// comma-separated fields without quoting.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error("missing column '" + name + "'");
  }
  bool has(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error("empty csv");
  t.header = split_csv_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) throw Error("csv row has " + std::to_string(row.size()) + " fields");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace mftg::plot
