#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "phc/error.hpp"
#include "phc/plot.hpp"

namespace phc::plot {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 80, kRight = 24, kTop = 40, kBottom = 56;

const std::array<const char*, 6> kPalette{"#1f4e9c", "#c23b22", "#2a8a3e", "#7b3f9e", "#d08a00", "#333333"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v, double step) {
  char buf[32];
  const int digits = step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(step) - 1e-9));
  std::snprintf(buf, sizeof buf, "%.*f", std::min(digits, 8), std::abs(v) < 1e-12 * step ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

struct Range {
  double lo, hi;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double d = std::abs(lo) > 0 ? 0.05 * std::abs(lo) : 1.0;
    return {lo - d, hi + d};
  }
  return {lo, hi};
}

std::vector<double> ticks(Range r, double& step) {
  const double raw = (r.hi - r.lo) / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  step = (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
  std::vector<double> out;
  for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * step; t += step) out.push_back(t);
  return out;
}

struct Frame {
  Range x, y;
  double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }
};

std::string header() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) +
         "\" font-family=\"DejaVu Sans, Arial, sans-serif\" font-size=\"12\">\n"
         "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"#ffffff\"/>\n";
}

std::string axes(const Frame& f, const Labels& labels) {
  std::string s;
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kTop, y1 = kHeight - kBottom;
  s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(x1 - x0) + "\" height=\"" + num(y1 - y0) +
       "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
  double step = 0;
  for (double t : ticks(f.x, step)) {
    const double p = f.px(t);
    s += "<line x1=\"" + num(p) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(p) + "\" y2=\"" + num(y1 + 5) +
         "\" stroke=\"#000000\"/>\n";
    s += "<text x=\"" + num(p) + "\" y=\"" + num(y1 + 18) + "\" text-anchor=\"middle\">" + tick_label(t, step) + "</text>\n";
  }
  for (double t : ticks(f.y, step)) {
    const double p = f.py(t);
    s += "<line x1=\"" + num(x0 - 5) + "\" y1=\"" + num(p) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(p) +
         "\" stroke=\"#000000\"/>\n";
    s += "<text x=\"" + num(x0 - 8) + "\" y=\"" + num(p + 4) + "\" text-anchor=\"end\">" + tick_label(t, step) + "</text>\n";
  }
  s += "<text x=\"" + num(0.5 * (x0 + x1)) + "\" y=\"" + num(kHeight - 14) + "\" text-anchor=\"middle\">" +
       escape(labels.x) + "</text>\n";
  s += "<text x=\"18\" y=\"" + num(0.5 * (y0 + y1)) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       num(0.5 * (y0 + y1)) + ")\">" + escape(labels.y) + "</text>\n";
  s += "<text x=\"" + num(0.5 * (x0 + x1)) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(labels.title) + "</text>\n";
  return s;
}

// Perceptually ordered dark-to-bright ramp.
std::string colour(double t) {
  static const std::array<std::array<double, 3>, 5> stops{{{0.05, 0.03, 0.20},
                                                           {0.33, 0.07, 0.45},
                                                           {0.72, 0.20, 0.33},
                                                           {0.97, 0.55, 0.12},
                                                           {0.99, 0.97, 0.65}}};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double u = t - static_cast<double>(i);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<int>(std::lround(255.0 * (stops[i][c] * (1 - u) + stops[i + 1][c] * u)));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace

std::string line_plot(const std::vector<Series>& series, const Labels& labels) {
  if (series.empty()) throw ParameterError("nothing to plot");
  double xl = INFINITY, xh = -INFINITY, yl = INFINITY, yh = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ParameterError("series '" + s.name + "' has mismatched lengths");
    if (s.x.empty()) throw ParameterError("series '" + s.name + "' is empty");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xl = std::min(xl, s.x[i]);
      xh = std::max(xh, s.x[i]);
      yl = std::min(yl, s.y[i]);
      yh = std::max(yh, s.y[i]);
    }
  }
  if (!std::isfinite(xl)) throw ParameterError("no finite data to plot");
  const double ypad = 0.05 * (yh - yl);
  const Frame f{padded(xl, xh), padded(yl - ypad, yh + ypad)};
  std::string out = header() + axes(f, labels);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(f.px(s.x[i])) + "," + num(f.py(s.y[i]));
    }
    const char* col = kPalette[k % kPalette.size()];
    out += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = kTop + 16 + 16 * static_cast<double>(k);
    out += "<line x1=\"" + num(kWidth - kRight - 150) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(kWidth - kRight - 126) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(kWidth - kRight - 120) + "\" y=\"" + num(ly) + "\">" + escape(s.name) + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string heatmap(const std::vector<double>& x_axis, const std::vector<double>& y_axis,
                    const std::vector<std::vector<double>>& values, const Labels& labels) {
  if (x_axis.size() < 2 || y_axis.size() < 2) throw ParameterError("heatmap needs at least 2x2 samples");
  if (values.size() != y_axis.size()) throw ParameterError("heatmap row count does not match the y axis");
  double vmin = INFINITY, vmax = -INFINITY;
  for (const auto& row : values) {
    if (row.size() != x_axis.size()) throw ParameterError("heatmap column count does not match the x axis");
    for (double v : row) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  const Frame f{padded(x_axis.front(), x_axis.back()), padded(y_axis.front(), y_axis.back())};
  std::string out = header();
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  for (std::size_t r = 0; r < y_axis.size(); ++r) {
    const double ya = r == 0 ? y_axis[0] : 0.5 * (y_axis[r - 1] + y_axis[r]);
    const double yb = r + 1 == y_axis.size() ? y_axis[r] : 0.5 * (y_axis[r] + y_axis[r + 1]);
    for (std::size_t c = 0; c < x_axis.size(); ++c) {
      const double xa = c == 0 ? x_axis[0] : 0.5 * (x_axis[c - 1] + x_axis[c]);
      const double xb = c + 1 == x_axis.size() ? x_axis[c] : 0.5 * (x_axis[c] + x_axis[c + 1]);
      const double px0 = f.px(std::min(xa, xb)), px1 = f.px(std::max(xa, xb));
      const double py0 = f.py(std::max(ya, yb)), py1 = f.py(std::min(ya, yb));
      out += "<rect x=\"" + num(px0) + "\" y=\"" + num(py0) + "\" width=\"" + num(px1 - px0 + 0.3) + "\" height=\"" +
             num(py1 - py0 + 0.3) + "\" fill=\"" + colour((values[r][c] - vmin) / span) + "\"/>\n";
    }
  }
  return out + axes(f, labels) + "</svg>\n";
}

}  // namespace phc::plot
