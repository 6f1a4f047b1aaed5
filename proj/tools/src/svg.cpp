#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "aggload/errors.hpp"

namespace aggload::tools {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 30, kTop = 44, kBottom = 52;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void take(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool ok() const { return lo <= hi; }
  void pad() {
    if (!ok()) { lo = 0.0; hi = 1.0; return; }
    if (lo == hi) { lo -= 1.0; hi += 1.0; return; }
    double m = 0.04 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

// Round the raw tick step to 1/2/5 times a power of ten.
double nice_step(double span) {
  double raw = span / 5.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double frac = raw / mag;
  double step = frac < 1.5 ? 1.0 : frac < 3.5 ? 2.0 : frac < 7.5 ? 5.0 : 10.0;
  return step * mag;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
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

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<SvgSeries>& series) {
  Range xr, yr;
  for (const SvgSeries& s : series) {
    for (double v : s.x) xr.take(v);
    for (double v : s.y) yr.take(v);
  }
  xr.pad();
  yr.pad();

  auto px = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight); };
  auto py = [&](double v) { return kHeight - kBottom - (v - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
      << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\" font-weight=\"bold\">"
      << escape(title) << "</text>\n";

  // Grid and ticks.
  double xs = nice_step(xr.hi - xr.lo);
  double ys = nice_step(yr.hi - yr.lo);
  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (double v = std::ceil(xr.lo / xs) * xs; v <= xr.hi + 1e-9 * xs; v += xs) {
    double x = px(v);
    svg << "<line x1=\"" << x << "\" y1=\"" << kTop << "\" x2=\"" << x << "\" y2=\""
        << kHeight - kBottom << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\">" << fmt(v) << "</text>\n";
  }
  for (double v = std::ceil(yr.lo / ys) * ys; v <= yr.hi + 1e-9 * ys; v += ys) {
    double y = py(v);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kWidth - kRight
        << "\" y2=\"" << y << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  svg << "</g>\n";

  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
      << kWidth - kLeft - kRight << "\" height=\"" << kHeight - kTop - kBottom
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

  // Axis labels.
  svg << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape(x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << (kTop + kHeight - kBottom) / 2 << ")\">"
      << escape(y_label) << "</text>\n";

  // Series.
  for (std::size_t s = 0; s < series.size(); ++s) {
    const SvgSeries& sr = series[s];
    const std::string color =
        sr.color.empty() ? kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))] : sr.color;
    svg << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\"";
    if (sr.dashed) svg << " stroke-dasharray=\"6 4\"";
    svg << " d=\"";
    bool pen_down = false;
    const std::size_t count = std::min(sr.x.size(), sr.y.size());
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) {
        pen_down = false;
        continue;
      }
      svg << (pen_down ? 'L' : 'M') << px(sr.x[i]) << ' ' << py(sr.y[i]) << ' ';
      pen_down = true;
    }
    svg << "\"/>\n";
  }

  // Legend.
  double ly = kTop + 14;
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].label.empty()) continue;
    const std::string color = series[s].color.empty()
                                  ? kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))]
                                  : series[s].color;
    double lx = kWidth - kRight - 150;
    svg << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 24
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (series[s].dashed) svg << " stroke-dasharray=\"6 4\"";
    svg << "/>\n";
    svg << "<text x=\"" << lx + 30 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(series[s].label)
        << "</text>\n";
    ly += 16;
  }

  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << svg.str();
  if (!out) throw InputError("failed writing '" + path + "'");
}

}  // namespace aggload::tools
