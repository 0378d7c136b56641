// Copyright 2026 The nsx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NSX_PIPELINE_PLOT_HPP_
#define NSX_PIPELINE_PLOT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nsx {

// Small self-contained SVG charts. Every plot also gets a CSV with the
// numbers next to it so the image is never the only record.

struct PlotSeries {
  std::string name;
  std::vector<double> y;
};

namespace plot_detail {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;
};

inline Range padded_range(double lo, double hi) {
  if (!(std::isfinite(lo) && std::isfinite(hi))) return {0.0, 1.0};
  if (hi <= lo) {
    double pad = std::max(1.0, std::abs(lo));
    return {lo - pad, lo + pad};
  }
  double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace plot_detail

// Line chart over a shared integer x axis (0..n-1). Writes base.svg and
// base.csv.
inline void write_line_chart(const std::string& base, const std::string& title,
                             const std::string& xlabel, const std::vector<PlotSeries>& series) {
  using namespace plot_detail;
  if (series.empty()) throw std::invalid_argument("write_line_chart: no series");
  size_t n = 0;
  double lo = 1e300, hi = -1e300;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (n == 0) throw std::invalid_argument("write_line_chart: empty series");
  Range yr = padded_range(lo, hi);

  const double W = 640, H = 400, ml = 62, mr = 16, mt = 34, mb = 46;
  const double pw = W - ml - mr, ph = H - mt - mb;
  auto px = [&](double i) { return ml + (n == 1 ? pw / 2 : i / double(n - 1) * pw); };
  auto py = [&](double v) { return mt + (yr.hi - v) / (yr.hi - yr.lo) * ph; };

  std::ofstream svg(base + ".svg", std::ios::trunc);
  if (!svg) throw std::runtime_error("write_line_chart: cannot write " + base + ".svg");
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' font-family='monospace' font-size='12'>\n";
  svg << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  svg << "<text x='" << W / 2 << "' y='18' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  // axes
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + ph
      << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt + ph << "' x2='" << ml + pw << "' y2='" << mt + ph
      << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    double v = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    double y = py(v);
    svg << "<line x1='" << ml - 4 << "' y1='" << y << "' x2='" << ml + pw << "' y2='" << y
        << "' stroke='#dddddd'/>\n";
    svg << "<text x='" << ml - 8 << "' y='" << y + 4 << "' text-anchor='end'>" << fmt(v)
        << "</text>\n";
  }
  int xticks = std::min<size_t>(n, 7) - 1;
  for (int t = 0; t <= std::max(1, xticks); ++t) {
    size_t i = n == 1 ? 0 : static_cast<size_t>(std::llround(double(t) / std::max(1, xticks) * (n - 1)));
    double x = px(double(i));
    svg << "<text x='" << x << "' y='" << mt + ph + 16 << "' text-anchor='middle'>" << i
        << "</text>\n";
  }
  svg << "<text x='" << ml + pw / 2 << "' y='" << H - 10 << "' text-anchor='middle'>" << xlabel
      << "</text>\n";
  // series
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < series[s].y.size(); ++i)
      svg << fmt2(px(double(i))) << "," << fmt2(py(series[s].y[i])) << " ";
    svg << "'/>\n";
    svg << "<text x='" << ml + pw - 6 << "' y='" << mt + 14 + 14 * double(s)
        << "' text-anchor='end' fill='" << color << "'>" << series[s].name << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream csv(base + ".csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("write_line_chart: cannot write " + base + ".csv");
  csv << xlabel;
  for (const auto& s : series) csv << "," << s.name;
  csv << "\n";
  for (size_t i = 0; i < n; ++i) {
    csv << i;
    for (const auto& s : series) {
      csv << ",";
      if (i < s.y.size()) csv << fmt(s.y[i]);
    }
    csv << "\n";
  }
}

// Horizontal bar chart; labels may be long group keys. Writes base.svg and
// base.csv.
inline void write_bar_chart(const std::string& base, const std::string& title,
                            const std::vector<std::pair<std::string, double>>& bars) {
  using namespace plot_detail;
  if (bars.empty()) throw std::invalid_argument("write_bar_chart: no bars");
  double lo = 0.0, hi = 0.0;
  for (const auto& b : bars) {
    lo = std::min(lo, b.second);
    hi = std::max(hi, b.second);
  }
  Range xr = padded_range(lo, hi);

  const double W = 640, ml = 230, mr = 70, mt = 34, row = 26;
  const double pw = W - ml - mr;
  const double H = mt + row * double(bars.size()) + 20;
  auto px = [&](double v) { return ml + (v - xr.lo) / (xr.hi - xr.lo) * pw; };

  std::ofstream svg(base + ".svg", std::ios::trunc);
  if (!svg) throw std::runtime_error("write_bar_chart: cannot write " + base + ".svg");
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' font-family='monospace' font-size='12'>\n";
  svg << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  svg << "<text x='" << W / 2 << "' y='18' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  double x0 = px(std::max(0.0, xr.lo));
  svg << "<line x1='" << x0 << "' y1='" << mt << "' x2='" << x0 << "' y2='"
      << mt + row * double(bars.size()) << "' stroke='black'/>\n";
  for (size_t i = 0; i < bars.size(); ++i) {
    double y = mt + row * double(i) + 4;
    double xv = px(bars[i].second);
    double bx = std::min(x0, xv), bw = std::abs(xv - x0);
    const char* color = kPalette[i % kPaletteSize];
    svg << "<rect x='" << fmt2(bx) << "' y='" << fmt2(y) << "' width='" << fmt2(std::max(bw, 0.5))
        << "' height='" << row - 8 << "' fill='" << color << "'/>\n";
    svg << "<text x='" << ml - 8 << "' y='" << y + 13 << "' text-anchor='end'>" << bars[i].first
        << "</text>\n";
    svg << "<text x='" << fmt2(std::max(x0, xv) + 6) << "' y='" << y + 13 << "'>"
        << fmt2(bars[i].second) << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream csv(base + ".csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("write_bar_chart: cannot write " + base + ".csv");
  csv << "label,value\n";
  for (const auto& b : bars) csv << b.first << "," << fmt(b.second) << "\n";
}

}  // namespace nsx

#endif  // NSX_PIPELINE_PLOT_HPP_
