#pragma once

#include <string>
#include <utility>
#include <vector>

namespace crop {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  int width = 960;
  int height = 560;
  // Shaded x spans: highlights (light cyan) and dark spans (dim gray), used
  // for day/night shading and focus ranges on timelines.
  std::vector<std::pair<double, double>> highlight_x;
  std::vector<std::pair<double, double>> dark_x;
  bool draw_points = false;
};

void plot_lines(const std::vector<Series>& series, const PlotOptions& opt,
                const std::string& path);

/// Five-number summary: type-7 linearly interpolated quartiles, whiskers at
/// the most extreme data within 1.5*IQR of the box, the rest as outliers.
struct BoxStats {
  double q1 = 0, median = 0, q3 = 0;
  double whisker_lo = 0, whisker_hi = 0;
  std::vector<double> outliers;
};

BoxStats box_stats(std::vector<double> values);

void plot_boxes(const std::vector<double>& xs, const std::vector<std::vector<double>>& groups,
                const PlotOptions& opt, const std::string& path);

// Scatter colored by order (earlier = lighter, later = darker) with an
// optional chronological trace polyline.
void plot_scatter_time(const std::vector<double>& x, const std::vector<double>& y,
                       bool trace_line, const PlotOptions& opt, const std::string& path);

}  // namespace crop
