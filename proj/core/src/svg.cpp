#include "fsl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fsl/errors.hpp"

namespace fsl::svg {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 72.0;
constexpr double kRight = 24.0;
constexpr double kTop = 44.0;
constexpr double kBottom = 56.0;

std::string fixed(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, std::span<const Series> series) {
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw ArgumentError("line_chart: series '" + s.label + "' has mismatched x/y sizes");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        throw ArgumentError("line_chart: non-finite point in series '" + s.label + "'");
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (!(x_lo <= x_hi)) throw ArgumentError("line_chart: no data points");
  if (x_lo == x_hi) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_lo == y_hi) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  double plot_w = kWidth - kLeft - kRight;
  double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double v) { return kTop + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h; };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth, 0)
      << "\" height=\"" << fixed(kHeight, 0) << "\" viewBox=\"0 0 " << fixed(kWidth, 0) << " "
      << fixed(kHeight, 0) << "\">\n";
  out << "  <rect width=\"" << fixed(kWidth, 0) << "\" height=\"" << fixed(kHeight, 0)
      << "\" fill=\"#ffffff\"/>\n";
  out << "  <text x=\"" << fixed(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << escape(title) << "</text>\n";

  const int ticks = 5;
  for (int t = 0; t < ticks; ++t) {
    double fx = x_lo + (x_hi - x_lo) * t / (ticks - 1);
    double fy = y_lo + (y_hi - y_lo) * t / (ticks - 1);
    double gx = px(fx);
    double gy = py(fy);
    out << "  <line x1=\"" << fixed(gx) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(gx)
        << "\" y2=\"" << fixed(kTop + plot_h) << "\" stroke=\"#dddddd\"/>\n";
    out << "  <line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(gy) << "\" x2=\""
        << fixed(kLeft + plot_w) << "\" y2=\"" << fixed(gy) << "\" stroke=\"#dddddd\"/>\n";
    out << "  <text x=\"" << fixed(gx) << "\" y=\"" << fixed(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(fx) << "</text>\n";
    out << "  <text x=\"" << fixed(kLeft - 8) << "\" y=\"" << fixed(gy + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(fy) << "</text>\n";
  }

  out << "  <rect x=\"" << fixed(kLeft) << "\" y=\"" << fixed(kTop) << "\" width=\""
      << fixed(plot_w) << "\" height=\"" << fixed(plot_h)
      << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "  <text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"" << fixed(kHeight - 12)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape(x_label) << "</text>\n";
  out << "  <text x=\"18\" y=\"" << fixed(kTop + plot_h / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 "
      << fixed(kTop + plot_h / 2) << ")\">" << escape(y_label) << "</text>\n";

  for (const auto& s : series) {
    out << "  <polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << ' ';
      out << fixed(px(s.x[i])) << ',' << fixed(py(s.y[i]));
    }
    out << "\"/>\n";
  }

  double legend_y = kTop + 14;
  for (const auto& s : series) {
    out << "  <line x1=\"" << fixed(kLeft + plot_w - 150) << "\" y1=\"" << fixed(legend_y - 4)
        << "\" x2=\"" << fixed(kLeft + plot_w - 126) << "\" y2=\"" << fixed(legend_y - 4)
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    out << "  <text x=\"" << fixed(kLeft + plot_w - 120) << "\" y=\"" << fixed(legend_y)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.label) << "</text>\n";
    legend_y += 18;
  }

  out << "</svg>\n";
  return out.str();
}

}  // namespace fsl::svg
