#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "navprobe/common.hpp"
#include "navprobe/shap.hpp"

namespace navprobe {

namespace detail {

inline std::string svg_num(double v) { return fmt_double(v); }

// two-color ramp, low -> blue, high -> red (matching the usual beeswarm color axis)
inline std::string ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(31 + t * (214 - 31));
  const int g = static_cast<int>(119 + t * (39 - 119));
  const int b = static_cast<int>(180 + t * (40 - 180));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace detail

// Beeswarm: one horizontal band per ranked unit, x = shap value, seeded
// vertical jitter, dot color = activation percentile within the unit.
inline std::string beeswarm_svg(const std::vector<BeeswarmRow>& rows, const UnitRanking& ranking,
                                int k, uint64_t jitter_seed) {
  const int width = 720, row_h = 46, margin = 56;
  const int height = margin * 2 + row_h * std::max(k, 1);

  double lo = 0.0, hi = 0.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.shap);
    hi = std::max(hi, r.shap);
  }
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double span = hi - lo;
  const auto x_of = [&](double v) {
    return margin + (v - lo) / span * (width - 2.0 * margin);
  };

  // per-unit activation percentiles for the color axis
  std::map<int, std::vector<double>> unit_acts;
  for (const auto& r : rows) unit_acts[r.unit].push_back(r.activation);
  for (auto& [unit, acts] : unit_acts) std::sort(acts.begin(), acts.end());
  const auto percentile = [&](int unit, double v) {
    const auto& acts = unit_acts[unit];
    const auto it = std::lower_bound(acts.begin(), acts.end(), v);
    return acts.size() <= 1 ? 0.5
                            : static_cast<double>(it - acts.begin()) /
                                  static_cast<double>(acts.size() - 1);
  };

  std::map<int, int> band_of;
  for (int i = 0; i < k; ++i) band_of[ranking.order[i]] = i;

  Rng jitter(Rng::derive(jitter_seed, 0xbeeULL));
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double x0 = x_of(0.0);
  svg += "<line x1=\"" + detail::svg_num(x0) + "\" y1=\"" + std::to_string(margin / 2) +
         "\" x2=\"" + detail::svg_num(x0) + "\" y2=\"" + std::to_string(height - margin / 2) +
         "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (int i = 0; i < k; ++i) {
    const int unit = ranking.order[i];
    const double y = margin + row_h * (i + 0.5);
    svg += "<text x=\"6\" y=\"" + detail::svg_num(y + 4) +
           "\" font-family=\"monospace\" font-size=\"13\">unit " + std::to_string(unit) +
           "</text>\n";
    svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + detail::svg_num(y) + "\" x2=\"" +
           std::to_string(width - margin / 2) + "\" y2=\"" + detail::svg_num(y) +
           "\" stroke=\"#eee\"/>\n";
  }
  for (const auto& r : rows) {
    const auto it = band_of.find(r.unit);
    if (it == band_of.end()) continue;
    const double y = margin + row_h * (it->second + 0.5) + jitter.range(-row_h * 0.32, row_h * 0.32);
    svg += "<circle cx=\"" + detail::svg_num(x_of(r.shap)) + "\" cy=\"" + detail::svg_num(y) +
           "\" r=\"2.4\" fill=\"" + detail::ramp_color(percentile(r.unit, r.activation)) +
           "\" fill-opacity=\"0.75\"/>\n";
  }
  svg += "<text x=\"" + std::to_string(width / 2 - 30) + "\" y=\"" + std::to_string(height - 10) +
         "\" font-family=\"monospace\" font-size=\"13\">shap value</text>\n";
  svg += "</svg>\n";
  return svg;
}

// Simple multi-series line chart with per-series labels; x values shared.
struct ChartSeries {
  std::string label;
  Vec y;
};

inline std::string line_chart_svg(const std::string& title, const Vec& x,
                                  const std::vector<ChartSeries>& series) {
  const int width = 640, height = 360, margin = 56;
  static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  double xlo = x.empty() ? 0.0 : x.front(), xhi = xlo;
  for (double v : x) {
    xlo = std::min(xlo, v);
    xhi = std::max(xhi, v);
  }
  double ylo = 0.0, yhi = 0.0;
  for (const auto& s : series)
    for (double v : s.y) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  if (xlo == xhi) xhi = xlo + 1.0;
  if (ylo == yhi) yhi = ylo + 1.0;
  const auto px = [&](double v) { return margin + (v - xlo) / (xhi - xlo) * (width - 2.0 * margin); };
  const auto py = [&](double v) {
    return height - margin - (v - ylo) / (yhi - ylo) * (height - 2.0 * margin);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(margin) + "\" y=\"24\" font-family=\"monospace\" "
         "font-size=\"14\">" + title + "</text>\n";
  svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + detail::svg_num(py(ylo)) +
         "\" x2=\"" + std::to_string(width - margin) + "\" y2=\"" + detail::svg_num(py(ylo)) +
         "\" stroke=\"#333\"/>\n";
  svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + detail::svg_num(py(ylo)) +
         "\" x2=\"" + std::to_string(margin) + "\" y2=\"" + detail::svg_num(py(yhi)) +
         "\" stroke=\"#333\"/>\n";
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 8];
    std::string points;
    for (size_t i = 0; i < series[s].y.size() && i < x.size(); ++i) {
      points += detail::svg_num(px(x[i])) + "," + detail::svg_num(py(series[s].y[i])) + " ";
      svg += "<circle cx=\"" + detail::svg_num(px(x[i])) + "\" cy=\"" +
             detail::svg_num(py(series[s].y[i])) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    svg += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    svg += "<text x=\"" + std::to_string(width - margin + 4) + "\" y=\"" +
           std::to_string(40 + 16 * static_cast<int>(s)) +
           "\" font-family=\"monospace\" font-size=\"11\" fill=\"" + color + "\">" +
           series[s].label + "</text>\n";
  }
  // axis extremes
  svg += "<text x=\"" + std::to_string(margin - 8) + "\" y=\"" + detail::svg_num(py(ylo) + 14) +
         "\" font-family=\"monospace\" font-size=\"11\">" + fmt_double(xlo) + "</text>\n";
  svg += "<text x=\"" + detail::svg_num(px(xhi) - 10) + "\" y=\"" + detail::svg_num(py(ylo) + 14) +
         "\" font-family=\"monospace\" font-size=\"11\">" + fmt_double(xhi) + "</text>\n";
  svg += "<text x=\"4\" y=\"" + detail::svg_num(py(yhi) + 4) +
         "\" font-family=\"monospace\" font-size=\"11\">" + fmt_double(yhi) + "</text>\n";
  svg += "<text x=\"4\" y=\"" + detail::svg_num(py(ylo) + 4) +
         "\" font-family=\"monospace\" font-size=\"11\">" + fmt_double(ylo) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace navprobe
