#include "crop/plot.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crop {

namespace {

constexpr int kMarginL = 78, kMarginR = 24, kMarginT = 42, kMarginB = 56;

const cv::Scalar kPalette[] = {
    {180, 119, 31},  // blue (BGR)
    {14, 127, 255},  // orange
    {44, 160, 44},   // green
    {40, 39, 214},   // red
    {189, 103, 148}, // purple
};

struct Frame {
  cv::Mat img;
  double x_lo, x_hi, y_lo, y_hi;
  int w, h;

  cv::Point2d map(double x, double y) const {
    const double px = kMarginL + (x - x_lo) / (x_hi - x_lo) * (w - kMarginL - kMarginR);
    const double py = (h - kMarginB) - (y - y_lo) / (y_hi - y_lo) * (h - kMarginT - kMarginB);
    return {px, py};
  }
};

double nice_step(double range, int target_ticks) {
  if (range <= 0) return 1;
  const double raw = range / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10 * mag;
}

std::string tick_label(double v) {
  char buf[32];
  if (v != 0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-3))
    std::snprintf(buf, sizeof(buf), "%.2g", v);
  else
    std::snprintf(buf, sizeof(buf), "%g", std::round(v * 1e6) / 1e6);
  return buf;
}

Frame make_frame(const PlotOptions& opt, double x_lo, double x_hi, double y_lo, double y_hi) {
  if (!(x_hi > x_lo)) { x_lo -= 0.5; x_hi += 0.5; }
  if (!(y_hi > y_lo)) { y_lo -= 0.5; y_hi += 0.5; }
  // pad y a little so lines do not sit on the frame
  const double pad = (y_hi - y_lo) * 0.05;
  y_lo -= pad;
  y_hi += pad;

  Frame f;
  f.w = opt.width;
  f.h = opt.height;
  f.x_lo = x_lo;
  f.x_hi = x_hi;
  f.y_lo = y_lo;
  f.y_hi = y_hi;
  f.img = cv::Mat(opt.height, opt.width, CV_8UC3, cv::Scalar(255, 255, 255));

  // shaded spans first, under everything
  for (const auto& [a, b] : opt.dark_x) {
    cv::Point2d p0 = f.map(std::max(a, x_lo), y_lo), p1 = f.map(std::min(b, x_hi), y_hi);
    if (p1.x > p0.x)
      cv::rectangle(f.img, p0, p1, cv::Scalar(225, 225, 225), cv::FILLED);
  }
  for (const auto& [a, b] : opt.highlight_x) {
    cv::Point2d p0 = f.map(std::max(a, x_lo), y_lo), p1 = f.map(std::min(b, x_hi), y_hi);
    if (p1.x > p0.x)
      cv::rectangle(f.img, p0, p1, cv::Scalar(235, 255, 215), cv::FILLED);
  }

  const auto text = [&](const std::string& s, cv::Point p, double scale = 0.42,
                        cv::Scalar color = {60, 60, 60}) {
    cv::putText(f.img, s, p, cv::FONT_HERSHEY_SIMPLEX, scale, color, 1, cv::LINE_AA);
  };

  // ticks and grid
  const double xs = nice_step(x_hi - x_lo, 7), ys = nice_step(y_hi - y_lo, 6);
  for (double v = std::ceil(x_lo / xs) * xs; v <= x_hi + 1e-12; v += xs) {
    cv::Point2d p = f.map(v, y_lo);
    cv::line(f.img, {int(p.x), kMarginT}, {int(p.x), f.h - kMarginB}, cv::Scalar(238, 238, 238));
    cv::line(f.img, {int(p.x), f.h - kMarginB}, {int(p.x), f.h - kMarginB + 4},
             cv::Scalar(120, 120, 120));
    const std::string s = tick_label(v);
    text(s, {int(p.x) - int(s.size()) * 4, f.h - kMarginB + 18});
  }
  for (double v = std::ceil(y_lo / ys) * ys; v <= y_hi + 1e-12; v += ys) {
    cv::Point2d p = f.map(x_lo, v);
    cv::line(f.img, {kMarginL, int(p.y)}, {f.w - kMarginR, int(p.y)}, cv::Scalar(238, 238, 238));
    cv::line(f.img, {kMarginL - 4, int(p.y)}, {kMarginL, int(p.y)}, cv::Scalar(120, 120, 120));
    const std::string s = tick_label(v);
    text(s, {kMarginL - 10 - int(s.size()) * 7, int(p.y) + 4});
  }
  cv::rectangle(f.img, {kMarginL, kMarginT}, {f.w - kMarginR, f.h - kMarginB},
                cv::Scalar(80, 80, 80));
  if (!opt.title.empty()) text(opt.title, {kMarginL, kMarginT - 14}, 0.55, {20, 20, 20});
  if (!opt.xlabel.empty()) text(opt.xlabel, {f.w / 2 - int(opt.xlabel.size()) * 4, f.h - 12});
  if (!opt.ylabel.empty()) text(opt.ylabel, {8, kMarginT - 14});
  return f;
}

void finish(const Frame& f, const std::string& path) {
  if (!cv::imwrite(path, f.img)) throw std::runtime_error("cannot write plot: " + path);
}

}  // namespace

void plot_lines(const std::vector<Series>& series, const PlotOptions& opt,
                const std::string& path) {
  if (series.empty()) throw std::invalid_argument("plot_lines: no series");
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  Frame f = make_frame(opt, x_lo, x_hi, y_lo, y_hi);
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const cv::Scalar color = kPalette[si % std::size(kPalette)];
    for (size_t i = 0; i + 1 < s.x.size(); ++i)
      cv::line(f.img, f.map(s.x[i], s.y[i]), f.map(s.x[i + 1], s.y[i + 1]), color, 1,
               cv::LINE_AA);
    if (opt.draw_points || s.x.size() == 1)
      for (size_t i = 0; i < s.x.size(); ++i)
        cv::circle(f.img, f.map(s.x[i], s.y[i]), 2, color, cv::FILLED, cv::LINE_AA);
    // legend
    const int ly = kMarginT + 16 + static_cast<int>(si) * 16;
    cv::line(f.img, {f.w - kMarginR - 120, ly}, {f.w - kMarginR - 96, ly}, color, 2);
    cv::putText(f.img, s.label, {f.w - kMarginR - 90, ly + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(60, 60, 60), 1, cv::LINE_AA);
  }
  finish(f, path);
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("box_stats: empty");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double p) {
    const double idx = p * (values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(idx));
    const size_t hi = static_cast<size_t>(std::ceil(idx));
    return values[lo] + (values[hi] - values[lo]) * (idx - lo);
  };
  BoxStats b;
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_lo = b.q3;
  b.whisker_hi = b.q1;
  bool any = false;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
    } else {
      b.whisker_lo = any ? std::min(b.whisker_lo, v) : v;
      b.whisker_hi = any ? std::max(b.whisker_hi, v) : v;
      any = true;
    }
  }
  if (!any) {  // degenerate: everything flagged; fall back to the box
    b.whisker_lo = b.q1;
    b.whisker_hi = b.q3;
  }
  return b;
}

void plot_boxes(const std::vector<double>& xs, const std::vector<std::vector<double>>& groups,
                const PlotOptions& opt, const std::string& path) {
  if (xs.size() != groups.size() || xs.empty())
    throw std::invalid_argument("plot_boxes: bad inputs");
  std::vector<BoxStats> stats;
  stats.reserve(groups.size());
  double y_lo = 1e300, y_hi = -1e300;
  for (const auto& g : groups) {
    stats.push_back(box_stats(g));
    for (double v : g) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  const double x_lo = xs.front() - 1, x_hi = xs.back() + 1;
  Frame f = make_frame(opt, x_lo, x_hi, y_lo, y_hi);
  const double half = xs.size() > 1 ? (xs[1] - xs[0]) * 0.33 : 0.33;
  const cv::Scalar box_color(160, 90, 30), med_color(40, 39, 214);
  for (size_t i = 0; i < xs.size(); ++i) {
    const BoxStats& b = stats[i];
    const double x = xs[i];
    cv::rectangle(f.img, f.map(x - half, b.q1), f.map(x + half, b.q3), box_color, 1, cv::LINE_AA);
    cv::line(f.img, f.map(x - half, b.median), f.map(x + half, b.median), med_color, 2);
    cv::line(f.img, f.map(x, b.q3), f.map(x, b.whisker_hi), box_color, 1, cv::LINE_AA);
    cv::line(f.img, f.map(x, b.q1), f.map(x, b.whisker_lo), box_color, 1, cv::LINE_AA);
    cv::line(f.img, f.map(x - half * 0.6, b.whisker_hi), f.map(x + half * 0.6, b.whisker_hi),
             box_color, 1, cv::LINE_AA);
    cv::line(f.img, f.map(x - half * 0.6, b.whisker_lo), f.map(x + half * 0.6, b.whisker_lo),
             box_color, 1, cv::LINE_AA);
    for (double v : b.outliers)
      cv::circle(f.img, f.map(x, v), 2, box_color, cv::FILLED, cv::LINE_AA);
  }
  finish(f, path);
}

void plot_scatter_time(const std::vector<double>& x, const std::vector<double>& y, bool trace_line,
                       const PlotOptions& opt, const std::string& path) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("plot_scatter_time: bad inputs");
  double x_lo = *std::min_element(x.begin(), x.end());
  double x_hi = *std::max_element(x.begin(), x.end());
  double y_lo = *std::min_element(y.begin(), y.end());
  double y_hi = *std::max_element(y.begin(), y.end());
  Frame f = make_frame(opt, x_lo, x_hi, y_lo, y_hi);
  const size_t n = x.size();
  if (trace_line)
    for (size_t i = 0; i + 1 < n; ++i)
      cv::line(f.img, f.map(x[i], y[i]), f.map(x[i + 1], y[i + 1]), cv::Scalar(210, 210, 210), 1,
               cv::LINE_AA);
  for (size_t i = 0; i < n; ++i) {
    const double t = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;  // earlier light, later dark
    const int shade = static_cast<int>(215 - 185 * t);
    cv::circle(f.img, f.map(x[i], y[i]), 3, cv::Scalar(shade, shade / 2 + 20, 20), cv::FILLED,
               cv::LINE_AA);
  }
  finish(f, path);
}

}  // namespace crop
