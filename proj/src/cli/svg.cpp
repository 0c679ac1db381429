#include "optrot/cli/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace optrot::cli {

namespace {

constexpr double kPanelW = 360.0;
constexpr double kPanelH = 260.0;
constexpr double kMarginL = 64.0;
constexpr double kMarginR = 16.0;
constexpr double kMarginT = 28.0;
constexpr double kMarginB = 40.0;
constexpr double kTitleH = 32.0;
constexpr double kLegendH = 24.0;

constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0;
  double hi = 1.0;

  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double t(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (t(v) - lo) / (hi - lo); }
};

Axis fit_axis(bool log, const std::vector<double>& values) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    if (!a.usable(v)) continue;
    lo = std::min(lo, a.t(v));
    hi = std::max(hi, a.t(v));
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

}  // namespace

std::string render_svg(const std::string& title, const std::vector<Panel>& panels,
                       std::size_t columns) {
  columns = std::max<std::size_t>(1, std::min(columns, std::max<std::size_t>(1, panels.size())));
  const std::size_t rows = (panels.size() + columns - 1) / columns;
  const double width = kPanelW * static_cast<double>(columns);
  const double height = kTitleH + (kPanelH + kLegendH) * static_cast<double>(rows);

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
    << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double ox = kPanelW * static_cast<double>(p % columns);
    const double oy = kTitleH + (kPanelH + kLegendH) * static_cast<double>(p / columns);
    const double x0 = ox + kMarginL;
    const double x1 = ox + kPanelW - kMarginR;
    const double y0 = oy + kPanelH - kMarginB;
    const double y1 = oy + kMarginT;

    std::vector<double> xs, ys;
    for (const Series& ser : panel.series) {
      xs.insert(xs.end(), ser.x.begin(), ser.x.end());
      ys.insert(ys.end(), ser.y.begin(), ser.y.end());
    }
    const Axis ax = fit_axis(panel.log_x, xs);
    const Axis ay = fit_axis(panel.log_y, ys);
    auto px = [&](double v) { return x0 + ax.frac(v) * (x1 - x0); };
    auto py = [&](double v) { return y0 - ay.frac(v) * (y0 - y1); };

    s << "<g>\n";
    s << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(oy + 18)
      << "\" text-anchor=\"middle\">" << escape(panel.title) << "</text>\n";
    s << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0)
      << "\" height=\"" << num(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
      const double fy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
      const double vx = ax.log ? std::pow(10.0, fx) : fx;
      const double vy = ay.log ? std::pow(10.0, fy) : fy;
      const double gx = x0 + (x1 - x0) * i / 4.0;
      const double gy = y0 - (y0 - y1) * i / 4.0;
      s << "<text x=\"" << num(gx) << "\" y=\"" << num(y0 + 14) << "\" text-anchor=\"middle\">"
        << tick(vx) << "</text>\n";
      s << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(gy + 4) << "\" text-anchor=\"end\">"
        << tick(vy) << "</text>\n";
    }
    s << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(y0 + 30)
      << "\" text-anchor=\"middle\">" << escape(panel.x_label) << "</text>\n";
    s << "<text transform=\"translate(" << num(ox + 12) << " " << num((y0 + y1) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(panel.y_label) << "</text>\n";

    for (std::size_t k = 0; k < panel.series.size(); ++k) {
      const Series& ser = panel.series[k];
      const char* color = kColors[k % kColors.size()];
      std::string points;
      for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
        if (!ax.usable(ser.x[i]) || !ay.usable(ser.y[i])) continue;
        if (!points.empty()) points += ' ';
        points += num(px(ser.x[i])) + "," + num(py(ser.y[i]));
      }
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
        << points << "\"/>\n";
      const double lx = ox + 8 + 88.0 * static_cast<double>(k % 4);
      const double ly = oy + kPanelH + 4 + 10.0 * static_cast<double>(k / 4);
      s << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 7) << "\" width=\"10\" height=\"3\" fill=\""
        << color << "\"/><text x=\"" << num(lx + 14) << "\" y=\"" << num(ly) << "\">"
        << escape(ser.name) << "</text>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace optrot::cli
